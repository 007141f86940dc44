use bundle3d_core::bundle::render_bundle;
use bundle3d_core::camera::CameraRigSpec;
use bundle3d_core::geometry::topology::euler_characteristic;
use bundle3d_core::geometry::{compute_vertex_normals, normalize_to_cube};
use bundle3d_core::recon::{reconstruct, InitMesh, ReconConfig};
use bundle3d_core::shapes::make_blob;

fn config(steps: u32) -> ReconConfig {
    ReconConfig {
        steps,
        target_edge_length: 0.05,
        init: InitMesh::Sphere { subdivisions: 3 },
        ..ReconConfig::default()
    }
}

#[test]
fn blob_round_trip_invariants() {
    let gt = compute_vertex_normals(&normalize_to_cube(&make_blob(11, 4).unwrap()).unwrap().0).unwrap();
    let bundle = render_bundle(&gt, &CameraRigSpec::default().with_image_size(192)).unwrap();

    for steps in [10, 20, 30] {
        let (mesh, trace) = reconstruct(&bundle, &config(steps)).unwrap();
        assert_eq!(euler_characteristic(&mesh), 2, "after {steps} steps");
        assert!(mesh.aabb().unwrap().contained_in(-1.05, 1.05));
        assert!(mesh.normals.is_some());
        let steps_seen: Vec<u32> = trace.checkpoints.iter().map(|c| c.step).collect();
        assert!(steps_seen.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*steps_seen.last().unwrap(), steps);
    }

    let (_, trace) = reconstruct(&bundle, &config(60)).unwrap();
    let r: Vec<f64> = trace.checkpoints.iter().map(|c| c.mean_residual_deg).collect();
    assert!(r.last().unwrap() <= r.first().unwrap());
    let windows = r.len() - 1;
    let non_increasing = r.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(non_increasing * 5 >= windows * 4, "{r:?}");
}

#[test]
fn all_background_bundle_is_rejected() {
    let gt = compute_vertex_normals(&normalize_to_cube(&make_blob(11, 2).unwrap()).unwrap().0).unwrap();
    let mut bundle = render_bundle(&gt, &CameraRigSpec::default().with_image_size(64)).unwrap();
    for m in &mut bundle.masks {
        m.data.fill(false);
    }
    assert!(reconstruct(&bundle, &config(5)).is_err());
}
