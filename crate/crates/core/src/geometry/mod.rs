//! Chart-local semi-Riemannian geometry: metrics, connection coefficients,
//! geodesic integration, causal classification and boundary operations.

mod integrate;
mod metric;
mod surface;

pub use integrate::{
    integrate_flow, integrate_geodesic, rk4_step, Flow, GeodesicFlow, GeodesicPath, IntegrationConfig, PathSample, Stop,
};
pub use metric::{
    causal_classify, christoffel, geodesic_acceleration, inner, CausalClass, CausalTag, Christoffel, MetricField,
    Signature, CAUSAL_TOL,
};
pub use surface::{
    boundary_normal, boundary_project, check_transversal, lightlike_completion, BoundaryHypersurface, SurfaceChart,
    SurfaceType,
};
