use morphrom::mesh::{synth_plate, synth_square_notch_plate, to_json_string, Mesh2D};
use morphrom::morph::{run, MorphConfig, MorphTarget};
use morphrom::rom::{offline_workflow, online_iterate, realize, OfflineConfig, OnlineStatus, RSelection, ReducedModel};
use morphrom::Vec2;

const H: f64 = 0.2;

fn reference() -> Mesh2D {
    synth_plate(0.5, H).unwrap()
}

fn target(r: f64) -> morphrom::mesh::BoundaryPolyline {
    let m = synth_plate(r, H).unwrap();
    m.boundary_polyline(m.vertices())
}

#[test]
fn identity_target_needs_no_iterations() {
    let mesh = reference();
    let t = MorphTarget::new(&mesh, &target(0.5)).unwrap();
    let res = run(&mesh, &t, &MorphConfig::plate()).unwrap();
    assert!(res.converged);
    assert_eq!(res.iterations, 0);
    assert_eq!(res.positions, mesh.vertices());
}

#[test]
fn morphing_reaches_the_target_without_inversion() {
    let mesh = reference();
    let t = MorphTarget::new(&mesh, &target(0.35)).unwrap();
    let cfg = MorphConfig::plate();
    let res = run(&mesh, &t, &cfg).unwrap();
    assert!(res.converged, "delta1 = {}", res.delta1);
    assert!(res.delta1 < cfg.epsilon);
    assert!(mesh.is_valid_configuration(&res.positions));
    for ((x, p), u) in res.positions.iter().zip(mesh.vertices()).zip(&res.displacement) {
        assert!((*x - (*p + *u)).norm() < 1e-14);
    }
    // Every target vertex is matched by some morphed boundary vertex.
    let boundary: Vec<Vec2> = mesh.boundary_vertices().iter().map(|&v| res.positions[v]).collect();
    for lp in t_loops(0.35) {
        for q in lp {
            let d = boundary.iter().map(|b| (*b - q).norm()).fold(f64::INFINITY, f64::min);
            assert!(d < 0.05, "target vertex {q:?} is {d} away");
        }
    }
}

fn t_loops(r: f64) -> Vec<Vec<Vec2>> {
    target(r).loops().iter().map(|l| l.points.clone()).collect()
}

fn small_model() -> ReducedModel {
    let radii: Vec<f64> = (0..8).map(|i| 0.3 + 0.4 * i as f64 / 7.0).collect();
    let targets: Vec<_> = radii.iter().enumerate().map(|(i, &r)| (format!("p{i}"), target(r))).collect();
    let cfg = OfflineConfig { selection: RSelection::Energy { delta_pod: 1e-8 }, ..OfflineConfig::plate() };
    offline_workflow(&reference(), &targets, &cfg).unwrap().model
}

#[test]
fn reduced_model_roundtrips_and_solves_in_distribution_targets() {
    let model = small_model();
    assert!(model.r() >= 1);
    assert_eq!(model.training_ids.len(), 8);

    let zero = realize(&model.reference, &model.basis, &vec![0.0; model.r()]).unwrap();
    assert_eq!(zero.positions, model.reference.vertices());

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("model.json");
    model.save(&p).unwrap();
    let back = ReducedModel::load(&p).unwrap();
    assert_eq!(to_json_string(&back).unwrap(), to_json_string(&model).unwrap());

    let settings = back.settings();
    for r in [0.37, 0.52, 0.61] {
        let report = back.solve(&target(r), &settings).unwrap();
        assert_eq!(report.status, OnlineStatus::Converged, "radius {r}: {report:?}");
        assert!(report.delta2 < model.delta_geo);
        let m = realize(&back.reference, &back.basis, &report.alpha).unwrap();
        assert!(m.valid);
    }

    let t = MorphTarget::new(&model.reference, &target(0.45)).unwrap();
    let (alpha, _) = model.initialize(&t).unwrap();
    let same = online_iterate(&model.reference, &model.basis, &alpha, &t, &model.elastic, 0.0).unwrap();
    assert_eq!(same, alpha);
}

#[test]
fn square_notch_is_out_of_distribution() {
    let model = small_model();
    let m = synth_square_notch_plate(0.35, H).unwrap();
    let settings = morphrom::rom::OnlineSettings { max_iterations: 1000, ..model.settings() };
    let report = model.solve(&m.boundary_polyline(m.vertices()), &settings).unwrap();
    assert_eq!(report.status, OnlineStatus::OutOfDistribution, "{report:?}");
    assert_eq!(report.status.exit_code(), 2);
    assert!(report.delta2 > model.delta_geo);
}
