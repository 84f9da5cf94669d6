mod ldl;
mod order;

pub(crate) use ldl::LdlFactor;
pub(crate) use order::minimum_degree;
