use std::path::PathBuf;

use actflow_core::mesh::{import_gmsh, refine_uniform, BoundaryMarker, GmshMarkerMap};

fn airfoil_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../meshes/naca0012.msh")
}

#[test]
fn airfoil_mesh_imports_with_expected_size() {
    let t = import_gmsh(airfoil_path(), &GmshMarkerMap::default()).unwrap();
    assert_eq!(t.num_cells(), 8808);
    t.check().unwrap();
    let markers = t.boundary_markers();
    assert_eq!(
        markers,
        vec![
            BoundaryMarker::Inflow,
            BoundaryMarker::Outflow,
            BoundaryMarker::Obstacle
        ]
    );
    let (lo, hi) = t.bounding_box();
    assert_eq!((lo, hi), ([-8.0, -8.0], [8.0, 8.0]));
    // domain minus an airfoil of area about 0.082
    let area = t.total_area();
    assert!(area > 256.0 - 0.09 && area < 256.0 - 0.07, "{area}");
    // one Euler characteristic per hole
    let v = t.num_vertices() as i64;
    let e = t.num_facets() as i64;
    let f = t.num_cells() as i64;
    assert_eq!(v - e + f, 0);
}

#[test]
fn refined_airfoil_dof_count() {
    let t = import_gmsh(airfoil_path(), &GmshMarkerMap::default()).unwrap();
    let dofs = |t: &actflow_core::mesh::Triangulation| {
        2 * t.num_cells() + 2 * t.num_facets() + t.num_cells()
    };
    assert_eq!(dofs(&t), 53_144);
    let fine = refine_uniform(&t);
    let n = dofs(&fine);
    assert_eq!(n, 211_984);
    assert!((n as f64 / 2.1e5 - 1.0).abs() < 0.05);
    let rel = (fine.total_area() - t.total_area()).abs() / t.total_area();
    assert!(rel < 1e-13, "relative area change {rel:e}");
}

#[test]
fn missing_file_is_io_error() {
    let err = import_gmsh("/nonexistent/mesh.msh", &GmshMarkerMap::default()).unwrap_err();
    assert!(matches!(err, actflow_core::Error::Io { .. }));
}
