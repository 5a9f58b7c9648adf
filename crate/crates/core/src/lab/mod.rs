//! Numerical experiments on sampled fields.

pub mod campanato;
pub mod field;
pub mod fit;
pub mod graph;
pub mod jensen;
pub mod mass;
pub mod modulus;
pub mod mollify;

pub use campanato::{campanato_distance_check, radial_profile, CampanatoParams, CampanatoReport};
pub use field::GridField;
pub use fit::{linear_fit, LinearFit};
pub use jensen::{jensen_gap, jensen_sweep, mean_ball, sup_ball, Rect};
pub use mass::{laplacian_mass, lelong_ratio, lelong_sweep, LelongReport};
pub use modulus::{dyadic_separations, fit_log_modulus, modulus_ladder, ModulusFit};
pub use mollify::{curvature_defect, mollify, mollify_sweep, Kernel, MollifyReport};
