//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Every expected value here comes from an oracle written in this file
//! (Monte Carlo, brute force, exhaustive enumeration or closed form), not
//! from the code under test.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fs;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use exhaustkit::alpha_shape::{bbox_diagonal, reconstruct, AlphaParam, TriangleMesh};
use exhaustkit::augment::{augment_frame, schedule_p_aug, AugmentParams};
use exhaustkit::eval::{average_precision_r40, inject_noise, EvalConfig, EvalError, Metric, NoiseProtocolParams, NOISE_LEVELS};
use exhaustkit::flat::{augment_flat, boxes_to_flat, iou_matrix_flat, noise_loss_flat, points_to_flat, PoolHandle};
use exhaustkit::gas_gen::{random_noise_cloud_with, sample_surface, transfer_reflectivity, GasCloudPool};
use exhaustkit::io::{self, Dataset};
use exhaustkit::loss::{bev_intersection_area, iou3d, iou_matrix, noise_loss, total_loss, DEFAULT_BETA};
use exhaustkit::resampler::resample_to_sensor;
use exhaustkit::seed::{derive_seed, STAGE_AUGMENT, STAGE_INJECT};
use exhaustkit::{Box3D, DetectionFrame, GroundTruth, Point, PointCloud, Prediction, SeededRng, SensorSpec};

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn chi_squared_p(observed: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    ChiSquared::new((observed.len() - 1) as f64).unwrap().sf(stat)
}

/// Box-local coordinates by direct rotation, independent of `Box3D::to_local`.
fn local(b: &Box3D, p: [f64; 3]) -> [f64; 3] {
    let c = b.center();
    let (s, co) = b.yaw().sin_cos();
    let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
    [co * dx + s * dy, -s * dx + co * dy, p[2] - c[2]]
}

fn inside(b: &Box3D, p: [f64; 3], grow: [f64; 3], tol: f64) -> bool {
    let q = local(b, p);
    let d = b.dims();
    (0..3).all(|k| q[k].abs() <= 0.5 * d[k] + grow[k] + tol)
}

fn random_box(rng: &mut SeededRng, near: Option<[f64; 3]>) -> Box3D {
    let c = match near {
        Some(c) => [c[0] + rng.random_range(-2.0..2.0), c[1] + rng.random_range(-2.0..2.0), c[2] + rng.random_range(-1.0..1.0)],
        None => [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-1.0..1.0)],
    };
    let dims = [rng.random_range(0.5..5.0), rng.random_range(0.5..3.0), rng.random_range(0.5..2.5)];
    Box3D::new(c, dims, rng.random_range(-PI..PI)).unwrap()
}

fn iou_monte_carlo() -> Outcome {
    let mut rng = SeededRng::new(1001);
    let samples = 100_000;
    let mut worst: f64 = 0.0;
    for pair in 0..200 {
        let a = random_box(&mut rng, None);
        let b = random_box(&mut rng, Some(a.center()));
        let d = a.dims();
        let c = a.center();
        let (s, co) = a.yaw().sin_cos();
        let mut hits = 0usize;
        for _ in 0..samples {
            let u = [d[0] * (rng.unit() - 0.5), d[1] * (rng.unit() - 0.5), d[2] * (rng.unit() - 0.5)];
            let p = [c[0] + co * u[0] - s * u[1], c[1] + s * u[0] + co * u[1], c[2] + u[2]];
            hits += usize::from(inside(&b, p, [0.0; 3], 0.0));
        }
        let inter = a.volume() * hits as f64 / samples as f64;
        let mc = inter / (a.volume() + b.volume() - inter);
        let err = (iou3d(&a, &b) - mc).abs();
        worst = worst.max(err);
        check(err <= 0.01, || format!("pair {pair}: kernel {} vs MC {mc}", iou3d(&a, &b)))?;
    }
    let unit = |c: [f64; 3], yaw: f64| Box3D::new(c, [1.0; 3], yaw).unwrap();
    let a = unit([0.0; 3], 0.0);
    let analytic = [
        ("identical", iou3d(&a, &a), 1.0),
        ("disjoint", iou3d(&a, &unit([3.0, 0.0, 0.0], 0.0)), 0.0),
        ("half-offset", iou3d(&a, &unit([0.5, 0.0, 0.0], 0.0)), 1.0 / 3.0),
        ("45deg area", bev_intersection_area(&a, &unit([0.0; 3], FRAC_PI_4)), 2.0 * (2f64.sqrt() - 1.0)),
    ];
    for (name, got, want) in analytic {
        check((got - want).abs() <= 1e-9, || format!("{name}: {got} != {want}"))?;
    }
    Ok(format!("max |kernel - MC| = {worst:.4} over 200 pairs; 4 analytic cases exact"))
}

/// Hull vertices by brute force: a triple spans a hull facet when every
/// other point lies on one side of its plane.
fn hull_vertices(p: &[[f64; 3]]) -> Vec<usize> {
    let n = p.len();
    let mut on_hull = vec![false; n];
    let sub = |a: [f64; 3], b: [f64; 3]| [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (u, v) = (sub(p[j], p[i]), sub(p[k], p[i]));
                let nrm = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
                let (mut pos, mut neg) = (false, false);
                for (m, q) in p.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let w = sub(*q, p[i]);
                    let side = nrm[0] * w[0] + nrm[1] * w[1] + nrm[2] * w[2];
                    pos |= side > 0.0;
                    neg |= side < 0.0;
                    if pos && neg {
                        break;
                    }
                }
                if !(pos && neg) {
                    on_hull[i] = true;
                    on_hull[j] = true;
                    on_hull[k] = true;
                }
            }
        }
    }
    (0..n).filter(|&i| on_hull[i]).collect()
}

fn key(p: &[f64; 3]) -> [u64; 3] {
    p.map(f64::to_bits)
}

fn alpha_convex_limit() -> Outcome {
    let mut rng = SeededRng::new(2002);
    let mut total = 0;
    for cloud_no in 0..50 {
        let pts: Vec<[f64; 3]> = (0..50)
            .map(|_| {
                if cloud_no % 2 == 0 {
                    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
                } else {
                    let (z, t, r) = (rng.random_range(-1.0..1.0f64), rng.random_range(0.0..TAU), rng.unit().cbrt());
                    let q = (1.0 - z * z).sqrt();
                    [r * q * t.cos(), r * q * t.sin(), r * z]
                }
            })
            .collect();
        let cloud = PointCloud::new(pts.iter().map(|p| Point::at(*p, 0.5)).collect());
        let mesh = reconstruct(&cloud, AlphaParam::new(1.0).unwrap()).map_err(|e| format!("cloud {cloud_no}: {e}"))?;
        let mut got: Vec<[u64; 3]> = mesh.vertices().iter().map(key).collect();
        let mut want: Vec<[u64; 3]> = hull_vertices(&pts).iter().map(|&i| key(&pts[i])).collect();
        got.sort();
        want.sort();
        check(got == want, || format!("cloud {cloud_no}: mesh has {} vertices, hull has {}", got.len(), want.len()))?;
        total += want.len();
    }
    Ok(format!("50 clouds, {total} hull vertices, all vertex sets equal"))
}

fn alpha_sphere() -> Outcome {
    let mut rng = SeededRng::new(3003);
    let pts: Vec<[f64; 3]> = (0..2000)
        .map(|_| {
            let (z, t) = (rng.random_range(-1.0..1.0f64), rng.random_range(0.0..TAU));
            let q = (1.0 - z * z).sqrt();
            [q * t.cos(), q * t.sin(), z]
        })
        .collect();
    let alpha = 0.3 / bbox_diagonal(&pts);
    let cloud = PointCloud::new(pts.iter().map(|p| Point::at(*p, 0.5)).collect());
    let mesh = reconstruct(&cloud, AlphaParam::new(alpha).unwrap()).map_err(|e| e.to_string())?;
    let worst = mesh
        .vertices()
        .iter()
        .map(|v| ((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    check(worst <= 1e-6, || format!("vertex off the sphere by {worst}"))?;
    let ratio = mesh.total_area() / (4.0 * PI);
    check((ratio - 1.0).abs() <= 0.05, || format!("area ratio {ratio}"))?;
    Ok(format!("{} triangles, area / 4pi = {ratio:.4}, max radius error {worst:.1e}", mesh.triangles().len()))
}

fn sampling_uniformity() -> Outcome {
    let (a, b, c) = ([0.0, 0.0, 0.0], [3.0, 0.5, 1.0], [0.5, 2.0, -0.5]);
    let mid = |p: [f64; 3], q: [f64; 3]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    // barycentric region: corner a, b, c, or the middle quarter
    let region = |p: [f64; 3]| {
        let (e1, e2, w) = ([b[0] - a[0], b[1] - a[1], b[2] - a[2]], [c[0] - a[0], c[1] - a[1], c[2] - a[2]], [p[0] - a[0], p[1] - a[1], p[2] - a[2]]);
        let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        let (d11, d12, d22, d1w, d2w) = (dot(e1, e1), dot(e1, e2), dot(e2, e2), dot(e1, w), dot(e2, w));
        let det = d11 * d22 - d12 * d12;
        let (u, v) = ((d22 * d1w - d12 * d2w) / det, (d11 * d2w - d12 * d1w) / det);
        if 1.0 - u - v > 0.5 {
            0
        } else if u > 0.5 {
            1
        } else if v > 0.5 {
            2
        } else {
            3
        }
    };
    let meshes = [
        ("single triangle", TriangleMesh::new(vec![a, b, c], vec![[0, 1, 2]])),
        (
            "four-triangle mesh",
            TriangleMesh::new(vec![a, b, c, ab, bc, ca], vec![[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]]),
        ),
    ];
    let mut report = Vec::new();
    for (seed, (name, mesh)) in meshes.iter().enumerate() {
        // one call draws at most 1000 points, so 10 seeded batches make 10^4
        let mut counts = [0.0; 4];
        for batch in 0..10u64 {
            let mut rng = SeededRng::new(4004 + 100 * seed as u64 + batch);
            for s in sample_surface(mesh, 1000, &mut rng).map_err(|e| e.to_string())? {
                counts[region(s)] += 1.0;
            }
        }
        let p = chi_squared_p(&counts, &[2500.0; 4]);
        check(p > 0.01, || format!("{name}: counts {counts:?}, p = {p}"))?;
        report.push(format!("{name} p = {p:.3}"));
    }

    let two = TriangleMesh::new(
        vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [10.0, 0.0, 0.0], [13.0, 0.0, 0.0], [10.0, 1.0, 0.0]],
        vec![[0, 1, 2], [3, 4, 5]],
    );
    let mut range = (usize::MAX, 0);
    for run in 0..20 {
        let samples = sample_surface(&two, 1000, &mut SeededRng::new(4100 + run)).map_err(|e| e.to_string())?;
        let big = samples.iter().filter(|p| p[0] >= 5.0).count();
        check((690..=810).contains(&big), || format!("run {run}: {big} of 1000 on the larger triangle"))?;
        range = (range.0.min(big), range.1.max(big));
    }
    report.push(format!("1:3 mesh larger-triangle counts {}..{} over 20 runs", range.0, range.1));
    Ok(report.join("; "))
}

fn reflectivity_transfer() -> Outcome {
    let mut rng = SeededRng::new(5005);
    let mut source: Vec<Point> = (0..300)
        .map(|i| {
            let g = |r: &mut SeededRng| r.random_range(0..8) as f64;
            Point::new(g(&mut rng), g(&mut rng), g(&mut rng), i as f64 / 300.0)
        })
        .collect();
    for i in 0..20 {
        let dup = source[i];
        source[250 + i] = Point { reflectivity: (250 + i) as f64 / 300.0, ..dup };
    }
    let samples: Vec<[f64; 3]> = (0..500).map(|_| [0, 1, 2].map(|_| rng.random_range(0..16) as f64 * 0.5)).collect();
    let src = PointCloud::new(source.clone());
    let out = transfer_reflectivity(&samples, &src).map_err(|e| e.to_string())?;
    let mut ties = 0;
    for (k, s) in samples.iter().enumerate() {
        let d2 = |p: &Point| (p.x - s[0]).powi(2) + (p.y - s[1]).powi(2) + (p.z - s[2]).powi(2);
        let best = source.iter().map(d2).fold(f64::INFINITY, f64::min);
        let nearest: Vec<usize> = (0..source.len()).filter(|&i| d2(&source[i]) == best).collect();
        ties += usize::from(nearest.len() > 1);
        let want = source[nearest[0]].reflectivity;
        check(out.points[k].reflectivity == want, || format!("sample {k}: got {}, brute force {want}", out.points[k].reflectivity))?;
        check(out.points[k].xyz() == *s, || format!("sample {k} moved"))?;
    }
    Ok(format!("500 samples match brute force exactly ({ties} tied queries)"))
}

fn placement_statistics() -> Outcome {
    let mut pool = GasCloudPool::new();
    pool.push_generated(random_noise_cloud_with(0.15, 100, &mut SeededRng::new(6)));
    let params = AugmentParams {
        p_aug: 1.0,
        ..AugmentParams::default()
    };
    let n = 10_000;
    let (mut top, mut anchors) = (0usize, [0usize; 3]);
    let mut yaw_rng = SeededRng::new(6006);
    for f in 0..n {
        let vehicle = Box3D::new([12.0, -3.0, -0.9], [4.2, 1.8, 1.5], yaw_rng.random_range(-PI..PI)).unwrap();
        let frame = DetectionFrame::new(PointCloud::new(vec![]), vec![GroundTruth::simple("Car", vehicle)]);
        let mut rng = SeededRng::new(derive_seed(77, &format!("{f:06}"), STAGE_AUGMENT));
        let aug = augment_frame(&frame, &pool, &params, &mut rng).map_err(|e| e.to_string())?;
        for g in &aug.gas_boxes {
            let q = local(&vehicle, g.center());
            if q[2] > 0.5 * vehicle.height() {
                top += 1;
            } else {
                check(q[0] < -0.5 * vehicle.length(), || format!("frame {f}: rear cloud not behind the vehicle"))?;
                anchors[if q[1] > 0.45 { 1 } else if q[1] < -0.45 { 2 } else { 0 }] += 1;
            }
        }
    }
    let rear: usize = anchors.iter().sum();
    let (ft, fr) = (top as f64 / n as f64, rear as f64 / n as f64);
    check((ft - 0.10).abs() <= 0.009, || format!("TOP frequency {ft}"))?;
    check((fr - 0.45).abs() <= 0.015, || format!("rear frequency {fr}"))?;
    let sigma = (rear as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
    for (i, &k) in anchors.iter().enumerate() {
        check((k as f64 - rear as f64 / 3.0).abs() <= 3.0 * sigma, || format!("anchor {i}: {k} of {rear}"))?;
    }
    Ok(format!("TOP {ft:.4}, rear {fr:.4}, anchors centre/left/right {anchors:?}"))
}

fn schedule() -> Outcome {
    let mut checked = 0;
    for t in 1..=100u32 {
        for e in 0..=t + 5 {
            let got = schedule_p_aug(e, t).map_err(|e| e.to_string())?;
            let want = if e <= t { f64::from(e) / f64::from(t) } else { 1.0 };
            check(got == want, || format!("schedule({e}, {t}) = {got}, expected {want}"))?;
            checked += 1;
        }
    }
    check(schedule_p_aug(0, 0).is_err(), || "T = 0 accepted".into())?;
    Ok(format!("{checked} (epoch, T) pairs exact"))
}

/// Cell of a point by linear scan over the beams.
fn oracle_cell(spec: &SensorSpec, p: &Point) -> Option<((usize, usize), f64)> {
    let r = (p.x * p.x + p.y * p.y + p.z * p.z).sqrt();
    if r <= 1e-9 || r > spec.max_range() {
        return None;
    }
    let phi = p.x.hypot(p.y).atan2(p.z);
    let e = spec.layer_elevations();
    let mut best = 0;
    for i in 1..e.len() {
        if (phi - e[i]).abs() < (phi - e[best]).abs() {
            best = i;
        }
    }
    let gap = match (phi < e[best], best) {
        (true, 0) => e[1] - e[0],
        (true, i) => e[i] - e[i - 1],
        (false, i) if i + 1 < e.len() => e[i + 1] - e[i],
        (false, i) => e[i] - e[i - 1],
    };
    if (phi - e[best]).abs() > 0.5 * gap {
        return None;
    }
    let bins = spec.bins_per_revolution() as i64;
    let az = ((p.y.atan2(p.x) + PI) / spec.azimuth_bin_width()).floor() as i64;
    Some(((best, az.rem_euclid(bins) as usize), r))
}

fn resampler() -> Outcome {
    let spec = SensorSpec::lidar40();
    let mut rng = SeededRng::new(7007);
    let mut points: Vec<Point> = (0..100_000)
        .map(|_| {
            let (z, t, r) = (rng.random_range(-0.7..0.5f64), rng.random_range(-PI..PI), rng.random_range(0.5..250.0));
            let q = (1.0 - z * z).sqrt();
            Point::new(r * q * t.cos(), r * q * t.sin(), r * z, rng.unit())
        })
        .collect();
    for i in 0..1000 {
        points[99_000 + i] = points[i * 7];
    }
    let cloud = PointCloud::new(points);
    let mut cells: Vec<((usize, usize), f64, usize)> =
        cloud.points.iter().enumerate().filter_map(|(i, p)| oracle_cell(&spec, p).map(|(c, r)| (c, r, i))).collect();
    cells.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut want: Vec<usize> = Vec::new();
    for (k, c) in cells.iter().enumerate() {
        if k == 0 || cells[k - 1].0 != c.0 {
            want.push(c.2);
        }
    }
    want.sort();
    let out = resample_to_sensor(&cloud, &spec);
    let got: Vec<Point> = want.iter().map(|&i| cloud.points[i]).collect();
    check(out.points == got, || format!("kernel kept {} points, oracle {}", out.len(), got.len()))?;
    check(resample_to_sensor(&out, &spec) == out, || "not idempotent".into())?;
    let cap = spec.layers() * spec.bins_per_revolution();
    check(out.len() <= cap, || format!("{} points exceed the {cap} cap", out.len()))?;
    Ok(format!("{} of 100000 kept, equal to oracle; idempotent; cap {cap}", out.len()))
}

fn noise_injection() -> Outcome {
    let base = DetectionFrame::new(
        PointCloud::new(vec![Point::new(1.0, 2.0, 3.0, 0.25), Point::new(-4.0, 0.5, 1.0, 0.75)]),
        vec![GroundTruth::simple("Car", Box3D::new([8.0, 1.0, -0.9], [4.0, 1.8, 1.5], 0.7).unwrap())],
    );
    let same = inject_noise(&base, &NoiseProtocolParams::new(0), &mut SeededRng::new(1));
    check(io::encode_points(&same.cloud) == io::encode_points(&base.cloud) && same == base, || "k' = 0 changed the frame".into())?;
    let mut report = vec!["k'=0 identity".to_string()];
    let mut rng = SeededRng::new(8008);
    for &k_prime in NOISE_LEVELS.iter().filter(|&&k| k > 0) {
        let params = NoiseProtocolParams::new(k_prime);
        let mut counts = vec![0.0; k_prime as usize + 1];
        for b in 0..10_000 {
            let gt = random_box(&mut rng, None);
            let frame = DetectionFrame::new(PointCloud::new(vec![]), vec![GroundTruth::simple("Car", gt)]);
            let id = format!("{k_prime}-{b}");
            let noisy = inject_noise(&frame, &params, &mut SeededRng::new(derive_seed(5, &id, STAGE_INJECT)));
            counts[noisy.cloud.len()] += 1.0;
            for p in &noisy.cloud.points {
                check(inside(&gt, p.xyz(), [0.25, 0.25, 0.0], 1e-9), || format!("k'={k_prime} box {b}: point outside the dilated box"))?;
                check((0.0..=1.0).contains(&p.reflectivity), || "reflectivity out of range".into())?;
            }
        }
        let expected = vec![10_000.0 / (k_prime as f64 + 1.0); counts.len()];
        let p = chi_squared_p(&counts, &expected);
        check(p > 0.01, || format!("k'={k_prime}: chi-squared p = {p}"))?;
        report.push(format!("k'={k_prime} p = {p:.3}"));
    }
    Ok(report.join("; ") + "; all points inside dilated boxes")
}

struct Scene {
    frames: Vec<(Vec<Prediction>, Vec<GroundTruth>)>,
}

fn oracle_difficulty(g: &GroundTruth) -> usize {
    match (g.occlusion, g.truncation) {
        (0, t) if t <= 0.15 => 0,
        (o, t) if o <= 1 && t <= 0.30 => 1,
        (o, t) if o <= 2 && t <= 0.50 => 2,
        _ => 3,
    }
}

fn vehicle(class: &str) -> bool {
    ["car", "van", "truck", "bus", "vehicle", "passengercar", "largevehicle"].contains(&class.to_lowercase().as_str())
}

/// `(tp, fp, valid gt)` when only predictions scoring at least `t` exist.
fn oracle_counts(frames: &[(Vec<Prediction>, Vec<GroundTruth>)], t: f64, level: usize, metric: Metric) -> (usize, usize, usize) {
    let (mut tp, mut fp, mut n_gt) = (0, 0, 0);
    for (preds, gts) in frames {
        let valid: Vec<bool> = gts.iter().map(|g| vehicle(&g.class) && oracle_difficulty(g) <= level).collect();
        let dont_care: Vec<bool> = gts.iter().map(|g| vehicle(&g.class) && oracle_difficulty(g) > level).collect();
        n_gt += valid.iter().filter(|v| **v).count();
        let mut order: Vec<usize> = (0..preds.len()).filter(|&i| preds[i].score >= t && vehicle(&preds[i].class)).collect();
        order.sort_by(|&a, &b| preds[b].score.partial_cmp(&preds[a].score).unwrap().then(a.cmp(&b)));
        let mut taken = vec![false; gts.len()];
        for p in order {
            let ious: Vec<f64> = gts.iter().map(|g| metric.iou(&preds[p].bbox, &g.bbox)).collect();
            let mut best: Option<usize> = None;
            for g in 0..gts.len() {
                if valid[g] && !taken[g] && ious[g] >= 0.7 && best.is_none_or(|b| ious[g] > ious[b]) {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                taken[g] = true;
                tp += 1;
            } else if !(0..gts.len()).any(|g| dont_care[g] && ious[g] >= 0.7) {
                fp += 1;
            }
        }
    }
    (tp, fp, n_gt)
}

fn oracle_ap(frames: &[(Vec<Prediction>, Vec<GroundTruth>)], level: usize, metric: Metric) -> Option<f64> {
    let mut thresholds: Vec<f64> = frames.iter().flat_map(|(p, _)| p.iter().map(|x| x.score)).collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let n_gt = oracle_counts(frames, f64::INFINITY, level, metric).2;
    if n_gt == 0 {
        return None;
    }
    let curve: Vec<(f64, f64)> = thresholds
        .iter()
        .map(|&t| oracle_counts(frames, t, level, metric))
        .filter(|(tp, fp, _)| tp + fp > 0)
        .map(|(tp, fp, _)| (tp as f64 / n_gt as f64, tp as f64 / (tp + fp) as f64))
        .collect();
    let sum: f64 = (1..=40)
        .map(|i| curve.iter().filter(|(r, _)| *r >= i as f64 / 40.0).map(|(_, p)| *p).fold(0.0, f64::max))
        .sum();
    Some(100.0 * sum / 40.0)
}

fn random_scene(rng: &mut SeededRng) -> Scene {
    let frames = (0..rng.random_range(1..=3))
        .map(|_| {
            let gts: Vec<GroundTruth> = (0..rng.random_range(1..=5))
                .map(|k| {
                    let class = ["Car", "Car", "Car", "Van", "Pedestrian"][rng.random_range(0..5)];
                    let b = Box3D::new([8.0 * k as f64, rng.random_range(-3.0..3.0), -0.9], [4.0, 1.8, 1.5], rng.random_range(-PI..PI)).unwrap();
                    GroundTruth {
                        occlusion: rng.random_range(0..=3),
                        truncation: [0.0, 0.1, 0.2, 0.4, 0.6][rng.random_range(0..5)],
                        ..GroundTruth::simple(class, b)
                    }
                })
                .collect();
            let mut preds = Vec::new();
            for g in &gts {
                for _ in 0..rng.random_range(0..=2) {
                    let c = g.bbox.center();
                    let s = rng.random_range(0.9..1.1);
                    let b = Box3D::new(
                        [c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.4..0.4), c[2] + rng.random_range(-0.2..0.2)],
                        g.bbox.dims().map(|d| d * s),
                        g.bbox.yaw() + rng.random_range(-0.2..0.2),
                    )
                    .unwrap();
                    let class = if rng.chance(0.9) { "Car" } else { "Pedestrian" };
                    preds.push(Prediction::new(class, b, rng.random_range(1..=9) as f64 / 10.0));
                }
            }
            for _ in 0..rng.random_range(0..=2) {
                let b = Box3D::new([rng.random_range(-5.0..40.0), rng.random_range(-10.0..10.0), -0.9], [4.0, 1.8, 1.5], 0.0).unwrap();
                preds.push(Prediction::new("Car", b, rng.random_range(1..=9) as f64 / 10.0));
            }
            (preds, gts)
        })
        .collect();
    Scene { frames }
}

fn ap_evaluator() -> Outcome {
    let ds = Dataset::new(mini());
    let frames: Vec<(Vec<Prediction>, Vec<GroundTruth>)> = ds
        .labeled_ids()
        .map_err(|e| e.to_string())?
        .iter()
        .map(|id| {
            let gts = io::read_labels(&ds.label_path(id), io::LabelFrame::Sensor).unwrap();
            (ds.read_predictions(id).unwrap(), gts)
        })
        .collect();
    let levels = |r: &exhaustkit::eval::APResult| [r.easy.ap, r.moderate.ap, r.hard.ap];
    for metric in [Metric::Bev, Metric::ThreeD] {
        let cfg = EvalConfig::with_metric(metric);
        let perfect = average_precision_r40(&frames, &cfg).map_err(|e| e.to_string())?;
        check(levels(&perfect).iter().all(|ap| format!("{ap:.2}") == "100.00"), || format!("perfect: {perfect:?}"))?;
        let empty: Vec<_> = frames.iter().map(|(_, g)| (vec![], g.clone())).collect();
        let none = average_precision_r40(&empty, &cfg).map_err(|e| e.to_string())?;
        check(levels(&none).iter().all(|ap| format!("{ap:.2}") == "0.00"), || format!("empty: {none:?}"))?;
    }
    let car = |x: f64| Box3D::new([x, 0.0, -0.9], [4.0, 1.8, 1.5], 0.0).unwrap();
    let gts: Vec<GroundTruth> = (0..10).map(|i| GroundTruth::simple("Car", car(10.0 * i as f64))).collect();
    let preds: Vec<Prediction> = (0..5).map(|i| Prediction::new("Car", car(10.0 * i as f64), 0.5 + 0.05 * i as f64)).collect();
    let half = average_precision_r40(&[(preds, gts)], &EvalConfig::default()).map_err(|e| e.to_string())?;
    // recall reaches 5/10 at precision 1: positions 1..=20 of 40 score 1
    check(format!("{:.2}", half.hard.ap) == "50.00", || format!("half-detected: {}", half.hard.ap))?;

    let mut rng = SeededRng::new(9009);
    let (mut compared, mut worst) = (0, 0.0f64);
    for n in 0..100 {
        let scene = random_scene(&mut rng);
        for metric in [Metric::Bev, Metric::ThreeD] {
            let got = average_precision_r40(&scene.frames, &EvalConfig::with_metric(metric));
            for level in 0..3 {
                let want = oracle_ap(&scene.frames, level, metric);
                match (&got, want) {
                    (Ok(r), Some(w)) => {
                        let g = levels(r)[level];
                        worst = worst.max((g - w).abs());
                        check((g - w).abs() <= 1e-9, || format!("scene {n} {metric:?} level {level}: {g} vs oracle {w}"))?;
                        compared += 1;
                    }
                    (Ok(r), None) => check(levels(r)[level] == 0.0, || format!("scene {n}: AP without ground truth"))?,
                    (Err(EvalError::NoGroundTruth), None) => {}
                    (Err(e), _) => return Err(format!("scene {n}: {e}")),
                }
            }
        }
    }
    Ok(format!("perfect 100.00, empty 0.00, half 50.00; {compared} random comparisons, max diff {worst:.1e}"))
}

fn loss_arithmetic() -> Outcome {
    check(DEFAULT_BETA == 0.1, || "default beta".into())?;
    let mut rng = SeededRng::new(1111);
    for _ in 0..1000 {
        let (lt, ln, beta) = (rng.random_range(0.0..10.0), rng.unit(), rng.random_range(0.0..2.0));
        let l = total_loss(lt, ln, beta);
        let want = lt + beta * ln;
        check((l.total - want).abs() <= f64::EPSILON * want.abs(), || format!("{lt} + {beta}*{ln} = {}", l.total))?;
    }
    let a = Box3D::cube([0.0; 3], 1.0).unwrap();
    let half = Box3D::cube([0.5, 0.0, 0.0], 1.0).unwrap();
    let far = Box3D::cube([20.0, 0.0, 0.0], 1.0).unwrap();
    check(noise_loss(&[a], &[a]) == 1.0, || "identical".into())?;
    check(noise_loss(&[], &[a]) == 0.0 && noise_loss(&[a], &[]) == 0.0, || "empty".into())?;
    check((noise_loss(&[half, far], &[a]) - 1.0 / 6.0).abs() <= 1e-12, || "mean of (1/3, 0)".into())?;
    for _ in 0..200 {
        let preds: Vec<Box3D> = (0..rng.random_range(1..6)).map(|_| random_box(&mut rng, None)).collect();
        let gas: Vec<Box3D> = (0..rng.random_range(1..6)).map(|_| random_box(&mut rng, None)).collect();
        let l = noise_loss(&preds, &gas);
        let brute = preds.iter().map(|p| gas.iter().map(|g| iou3d(p, g)).fold(0.0, f64::max)).sum::<f64>() / preds.len() as f64;
        check((0.0..=1.0).contains(&l), || format!("loss {l} out of [0, 1]"))?;
        check(l == brute, || format!("loss {l} vs mean of max {brute}"))?;
    }
    Ok("1000 totals exact to 1 ulp; bounds and mean-of-max hold on 200 random sets".into())
}

fn end_to_end() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (pool, data) = fixture(root.path());
    let first = snapshot(&pipeline(root.path(), &pool, &data, "1"));
    let eight = snapshot(&pipeline(root.path(), &pool, &data, "8"));
    fs::remove_dir_all(root.path().join("run-1")).map_err(|e| e.to_string())?;
    let again = snapshot(&pipeline(root.path(), &pool, &data, "1"));
    check(first == eight, || "worker count changed the outputs".into())?;
    check(first == again, || "second run differs".into())?;
    let bytes: usize = first.values().map(Vec::len).sum();
    Ok(format!("{} files ({bytes} bytes) identical across 2 runs and 1 vs 8 workers", first.len()))
}

fn flat_interface() -> Outcome {
    let mut rng = SeededRng::new(1212);
    for case in 0..50 {
        let preds: Vec<Box3D> = (0..rng.random_range(0..6)).map(|_| random_box(&mut rng, None)).collect();
        let gas: Vec<Box3D> = (0..rng.random_range(0..4)).map(|_| random_box(&mut rng, Some([0.0; 3]))).collect();
        let (fp, fg) = (boxes_to_flat(&preds), boxes_to_flat(&gas));
        let (fp0, fg0) = (fp.clone(), fg.clone());
        let m = iou_matrix_flat(&fp, &fg).map_err(|e| e.to_string())?;
        let lib = iou_matrix(&preds, &gas);
        check(m.iter().zip(lib.values()).all(|(a, b)| (a - b).abs() <= 1e-9) && m.len() == lib.values().len(), || format!("case {case}: matrix"))?;
        let l = noise_loss_flat(&fp, &fg).map_err(|e| e.to_string())?;
        check((l - noise_loss(&preds, &gas)).abs() <= 1e-9, || format!("case {case}: loss"))?;
        check(fp == fp0 && fg == fg0, || format!("case {case}: inputs mutated"))?;
    }
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (pool, data) = fixture(root.path());
    let run_dir = pipeline(root.path(), &pool, &data, "2");
    let handle = PoolHandle::open(run_dir.join("pool")).map_err(|e| e.to_string())?;
    let ds = Dataset::new(&data);
    let spec = SensorSpec::lidar40();
    let params = AugmentParams::scheduled(10, 10).map_err(|e| e.to_string())?;
    let ids = ds.frame_ids().map_err(|e| e.to_string())?;
    for id in &ids {
        let (frame, _) = ds.read_frame(id).map_err(|e| e.to_string())?;
        let points = points_to_flat(&frame.cloud);
        let boxes = boxes_to_flat(&frame.vehicle_boxes().copied().collect::<Vec<_>>());
        let out = augment_flat(&handle, &points, &boxes, &params, Some(&spec), derive_seed(11, id, STAGE_AUGMENT)).map_err(|e| e.to_string())?;
        let cli = io::read_points(&run_dir.join("res/velodyne").join(format!("{id}.bin"))).map_err(|e| e.to_string())?;
        check(out.points == points_to_flat(&cli.cloud), || format!("frame {id}: flat augment differs from CLI"))?;
        check(points == points_to_flat(&frame.cloud), || format!("frame {id}: input mutated"))?;
    }
    Ok(format!("50 IoU/loss cases within 1e-9; {} frames equal to CLI augment + resample", ids.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Option<Duration>); 13] = [
        ("iou kernel vs Monte Carlo", iou_monte_carlo, Some(Duration::from_secs(10))),
        ("alpha shape convex limit", alpha_convex_limit, Some(Duration::from_secs(30))),
        ("alpha shape sphere fidelity", alpha_sphere, None),
        ("surface sampling uniformity", sampling_uniformity, None),
        ("reflectivity transfer", reflectivity_transfer, None),
        ("placement statistics", placement_statistics, None),
        ("p_aug schedule", schedule, None),
        ("sensor resampler", resampler, None),
        ("noise injection protocol", noise_injection, None),
        ("AP evaluator", ap_evaluator, None),
        ("loss arithmetic", loss_arithmetic, None),
        ("end-to-end determinism", end_to_end, None),
        ("flat-array interface (bindings surface)", flat_interface, None),
    ];
    let mut failed = 0;
    let mut summary = BTreeMap::new();
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if took > l => Err(format!("took {took:.1?}, limit {l:?}")),
            (o, _) => o,
        };
        match &outcome {
            Ok(detail) => println!("PASS  {name} [{took:.2?}]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name} [{took:.2?}]: {why}");
            }
        }
        summary.insert(name, outcome.is_ok());
    }
    let passed = summary.values().filter(|v| **v).count();
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
