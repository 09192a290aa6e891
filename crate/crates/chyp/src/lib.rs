pub mod curvature;
pub mod error;
pub mod fastgeo;
pub mod hermitian;
pub mod isometry;
pub mod mesh;
pub mod models;
pub mod runner;
pub mod solver;
pub mod surface;
pub mod toledo;
pub mod linalg;
