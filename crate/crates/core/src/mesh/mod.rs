pub mod generators;
pub mod geometry;
pub mod io;
pub mod topology;

pub use generators::{benchmark_mesh, BenchmarkParams};
pub use geometry::{chart_data, chart_eval, geometry_frame, ChartData, GeometryFrame};
pub use io::{load_mesh, save_mesh};
pub use topology::{
    build_topology, BoundarySel, BoundarySpec, BuildOptions, Edge, EdgeIncidence, EdgeKind,
    Element, ElemShape, OrientationPolicy, SurfaceMesh,
};
