//! Process exit codes derived from the error chain.

use isenet::beats::BeatsError;
use isenet::eval::EvalError;
use isenet::model::ModelError;
use isenet::train::TrainError;
use isenet::wfdb::WfdbError;

pub const OK: i32 = 0;
pub const OTHER: i32 = 1;
pub const CONFIG: i32 = 2;
pub const DATA: i32 = 3;
pub const NUMERIC: i32 = 4;

#[derive(Debug, thiserror::Error)]
#[error("configuration error: {0}")]
pub struct ConfigError(pub String);

#[derive(Debug, thiserror::Error)]
#[error("data error: {0}")]
pub struct DataError(pub String);

#[derive(Debug, thiserror::Error)]
#[error("numeric failure: {0}")]
pub struct NumericError(pub String);

fn wfdb(e: &WfdbError) -> i32 {
    match e {
        WfdbError::Parameter(_) => CONFIG,
        _ => DATA,
    }
}

fn model(e: &ModelError) -> i32 {
    match e {
        ModelError::Spec(_) | ModelError::Param(_) => CONFIG,
        ModelError::Autograd(_) => DATA,
    }
}

fn train(e: &TrainError) -> i32 {
    match e {
        TrainError::Config(_) => CONFIG,
        TrainError::NonFinite { .. } => NUMERIC,
        TrainError::Model(m) => model(m),
        TrainError::Eval(e) => eval(e),
        _ => DATA,
    }
}

fn eval(e: &EvalError) -> i32 {
    match e {
        EvalError::Config(_) => CONFIG,
        EvalError::Model(m) => model(m),
        EvalError::Train(t) => train(t),
        _ => DATA,
    }
}

fn beats(e: &BeatsError) -> i32 {
    match e {
        BeatsError::Config(_) => CONFIG,
        BeatsError::Wfdb(w) => wfdb(w),
        _ => DATA,
    }
}

/// First classifiable cause in the chain decides the code.
pub fn code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() || cause.is::<toml::de::Error>() {
            return CONFIG;
        }
        if cause.is::<DataError>() || cause.is::<std::io::Error>() {
            return DATA;
        }
        if cause.is::<NumericError>() {
            return NUMERIC;
        }
        if let Some(e) = cause.downcast_ref::<WfdbError>() {
            return wfdb(e);
        }
        if let Some(e) = cause.downcast_ref::<BeatsError>() {
            return beats(e);
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return model(e);
        }
        if let Some(e) = cause.downcast_ref::<TrainError>() {
            return train(e);
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return eval(e);
        }
    }
    OTHER
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_innermost_kind() {
        let e = anyhow::Error::new(TrainError::NonFinite {
            epoch: 1,
            batch: 2,
            detail: "nan".into(),
        });
        assert_eq!(code(&e), NUMERIC);
        let e = anyhow::Error::new(EvalError::from(TrainError::Model(ModelError::Spec("x".into()))));
        assert_eq!(code(&e), CONFIG);
        let e = anyhow::Error::new(BeatsError::Data("missing".into())).context("prepare");
        assert_eq!(code(&e), DATA);
        assert_eq!(code(&anyhow::anyhow!("plain")), OTHER);
    }
}
