#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exhaustkit::gas_gen::random_noise_cloud_with;
use exhaustkit::io::{self, Dataset};
use exhaustkit::{Box3D, DetectionFrame, GroundTruth, Point, PointCloud, SeededRng};
use rand::Rng;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_exhaustkit"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn exhaustkit")
}

pub fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn mini() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini")
}

/// Two source clouds and ten frames with background points and 1–3 cars.
pub fn fixture(root: &Path) -> (PathBuf, PathBuf) {
    let pool = root.join("pool");
    for (i, sigma) in [0.3, 0.25].iter().enumerate() {
        let src = random_noise_cloud_with(*sigma, 120, &mut SeededRng::new(100 + i as u64)).cloud;
        io::write_points(&pool.join(format!("sources/src{i}.bin")), &src).unwrap();
    }
    let data = root.join("data");
    let ds = Dataset::new(&data);
    let mut rng = SeededRng::new(7);
    for f in 0..10 {
        let points = (0..400)
            .map(|_| {
                Point::new(
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-50.0..50.0),
                    rng.random_range(-2.0..1.0),
                    rng.unit(),
                )
            })
            .collect();
        let gt = (0..1 + f % 3)
            .map(|k| {
                let c = [8.0 + 7.0 * k as f64, rng.random_range(-10.0..10.0), -0.9];
                GroundTruth::simple("Car", Box3D::new(c, [4.0, 1.8, 1.5], rng.random_range(-3.0..3.0)).unwrap())
            })
            .collect();
        ds.write_frame(&format!("{f:06}"), &DetectionFrame::new(PointCloud::new(points), gt), None).unwrap();
    }
    (pool, data)
}

/// Every file under `dir` except run manifests, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

pub fn pipeline(root: &Path, pool: &Path, data: &Path, workers: &str) -> PathBuf {
    let run_dir = root.join(format!("run-{workers}"));
    let gen_pool = run_dir.join("pool");
    ok(&["generate", "--pool", s(pool), "--out", s(&gen_pool), "--count", "6", "--seed", "11", "--workers", workers]);
    let aug = run_dir.join("aug");
    ok(&[
        "augment", "--data", s(data), "--pool", s(&gen_pool), "--out", s(&aug), "--epoch", "10", "--epochs", "10", "--seed", "11", "--workers",
        workers,
    ]);
    let res = run_dir.join("res");
    ok(&["resample", "--data", s(&aug), "--out", s(&res), "--sensor", "lidar40", "--workers", workers]);
    let noisy = run_dir.join("noisy");
    ok(&["inject-noise", "--data", s(&res), "--out", s(&noisy), "--kprime", "20", "--seed", "11", "--workers", workers]);
    run_dir
}

