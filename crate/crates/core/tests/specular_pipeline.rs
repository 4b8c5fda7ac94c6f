use weldsense::geom::angle_between;
use weldsense::sim::specular::{SpecularDataset, SpecularScene};
use weldsense::sim::Surface;
use weldsense::specular::{reconstruct_reflected_ray, SpecularCalibration};
use weldsense::Exec;

fn rms_error(scene: &SpecularScene, sigma: f64, seed: u64) -> f64 {
    let data = SpecularDataset::generate(scene, sigma, seed, Exec::Sequential).unwrap();
    let cal = SpecularCalibration::calibrate(&data.c1, &data.stacks, &data.mirror, &data.board2, &data.board3).unwrap();
    let out = cal.reconstruct(&data.pool, f64::INFINITY, Exec::Sequential).unwrap();
    assert!(out.rejected.is_empty());
    let truth = data.truth();
    assert_eq!(out.points.len(), truth.len());
    let ss: f64 = out
        .points
        .iter()
        .zip(&truth)
        .map(|(p, (id, t))| {
            assert_eq!(p.incident_index, *id);
            (p.position - t).norm_squared()
        })
        .sum();
    (ss / truth.len() as f64).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[test]
fn noise_free_cap_closure() {
    let e = rms_error(&SpecularScene::default(), 0.0, 0);
    assert!(e < 1e-8, "rms {e:e}");
}

#[test]
fn noise_free_flat_mirror_closure() {
    let scene = SpecularScene::default().with_flat_mirror();
    let e = rms_error(&scene, 0.0, 0);
    assert!(e < 1e-9, "rms {e:e}");
}

#[test]
fn noise_free_paraboloid_closure() {
    let mut scene = SpecularScene::default();
    scene.surface = Surface::Paraboloid { curvature: 0.05, rim: 4.0, center: [0.0, 0.0] };
    let e = rms_error(&scene, 0.0, 0);
    assert!(e < 1e-8, "rms {e:e}");
}

#[test]
fn noisy_median_and_monotone() {
    let scene = SpecularScene::default();
    let mut last = 0.0;
    for sigma in [0.0, 0.05, 0.1, 0.2] {
        let m = median((0..30).map(|s| rms_error(&scene, sigma, 1000 + s)).collect());
        eprintln!("sigma {sigma}: median rms {m:e}");
        assert!(m >= last);
        last = m;
        if sigma == 0.1 {
            assert!(m < 0.05, "median rms {m}");
        }
    }
}

#[test]
fn reflected_rays_and_plane_membership() {
    let scene = SpecularScene::default();
    let data = SpecularDataset::generate(&scene, 0.0, 0, Exec::Sequential).unwrap();
    let cal = SpecularCalibration::calibrate(&data.c1, &data.stacks, &data.mirror, &data.board2, &data.board3).unwrap();
    for (dot, rec) in data.pool.iter().zip(&data.records) {
        let h = rec.hit.unwrap();
        let ray = reconstruct_reflected_ray(dot.pix2, dot.pix3, &cal.planes).unwrap();
        let err = angle_between(ray.dir(), h.reflected.dir());
        assert!(err < 1e-10, "direction error {err:e}");
        let q2 = weldsense::specular::lift_to_plane(dot.pix2, &cal.planes.p2.plane, &cal.planes.p2.image_homography).unwrap();
        let q4 = weldsense::specular::lift_to_plane(dot.pix3, &cal.planes.p4.plane, &cal.planes.p4.image_homography).unwrap();
        assert!(cal.planes.p2.plane.signed_distance(&q2).abs() < 1e-10);
        assert!(cal.planes.p4.plane.signed_distance(&q4).abs() < 1e-10);
    }
}

#[test]
fn observation_planes_match_scene() {
    let scene = SpecularScene::default();
    let data = SpecularDataset::generate(&scene, 0.0, 0, Exec::Sequential).unwrap();
    let cal = SpecularCalibration::calibrate(&data.c1, &data.stacks, &data.mirror, &data.board2, &data.board3).unwrap();
    let pi2 = scene.p2.plane().unwrap();
    let splitter = scene.splitter.plane().unwrap();
    let o3 = weldsense::Point3::from(scene.p3.center);
    let n3 = weldsense::Vec3::from(scene.p3.normal);
    let pi4 = weldsense::Plane::from_point_normal(&splitter.reflect_point(&o3), &splitter.reflect_vector(&n3)).unwrap();
    assert!(cal.planes.p2.plane.max_coeff_diff(&pi2) < 1e-8);
    assert!(cal.planes.p4.plane.max_coeff_diff(&pi4) < 1e-8);
    assert!((cal.bundle.center - scene.laser.center()).norm() < 1e-8);
}
