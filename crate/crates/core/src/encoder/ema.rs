use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `momentum <- lambda * momentum + (1 - lambda) * encoder`, parameter-wise.
pub fn ema_update<T: Scalar>(momentum: &mut Mlp<T>, encoder: &Mlp<T>, lambda: T) -> Result<()> {
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(Error::InvalidConfig(format!("momentum coefficient {lambda} outside [0, 1]")));
    }
    momentum.params().ensure_same_shape(encoder.params(), "ema update")?;
    let keep = T::one() - lambda;
    for (m, &e) in momentum.params_mut().iter_mut().zip(encoder.params().iter()) {
        *m = lambda * *m + keep * e;
    }
    Ok(())
}
