//! Rod structures of biaxisymmetric solutions: exact integer lattice tools,
//! diagram analysis, toric plumbing decompositions, topology of the domain of
//! outer communication and its fill-ins, and model maps with a tension check.

pub mod intlin;
pub mod modelmap;
pub mod plumbing;
pub mod roddiagram;
pub mod topology;

pub use intlin::{
    det_k, determinant_divisor, hermite_normal_form, is_primitive_set, is_primitive_vector, smith_normal_form,
    HermiteForm, IntLinError, IntMatrix, IntVector, SmithForm,
};
pub use modelmap::{
    build_model_map, verify_tension, GridSpec, ModelMap, ModelMapError, ModelMapOptions, TensionReport,
};
pub use plumbing::{
    doc_decomposition, plumbing_to_rods, verify_plumbing_relations, Bundle, DocDecomposition, PlumbingError,
    ToricPlumbing,
};
pub use roddiagram::{CrossSection, DiagramError, Endpoint, Rod, RodDiagram, RodKind, Shape, ThreeManifold};
pub use topology::{
    classify, compactify, fillin_path, fundamental_group, AbelianGroup, Classification, FillinPlan, TopologyError,
};

pub use num_bigint::BigInt;
