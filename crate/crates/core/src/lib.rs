//! Recovery of the potential a(t,x) in u_t − Δ_x u − u_yy + a(t,x)u = f on
//! (0,T)×G×(0,π) from the integral measurement ∫₀^π u(t,x,y)ω(y)dy = ψ(t,x).
//!
//! The solution is expanded in the sine basis in y; every coefficient u_k
//! solves a parabolic problem in (t,x) and the coupling through a is resolved
//! by successive approximations with the coefficient lagged one sweep.

pub mod certify;
pub mod discretize;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod mms;
pub mod parabolic;
pub mod picard;
pub mod problem;
pub mod spectral;

pub use error::{Error, Result};
pub use exec::Strategy;
