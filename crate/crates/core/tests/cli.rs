use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geoxray::basis::{disk_indices, psi_hat, psi_kappa, u_prime, BasisIndex, CoeffTable};
use geoxray::cli::RunConfig;
use geoxray::geometry::{exit_time, CurvatureParam};
use geoxray::io;
use geoxray::xray::{sigma, sinogram, BoundaryGrid, ForwardQuad, ZernikeExpansion};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

fn geoxray(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geoxray")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = geoxray(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn cp(k: f64) -> CurvatureParam {
    CurvatureParam::new(k).unwrap()
}

/// Parses `a,b,re,im` rows (after the header) into tuples.
fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect()
}

fn small_grid(k: f64, nmax: i64) -> String {
    format!(r#"{{"kappa": {k}, "nmax": {nmax}, "n_beta": 24, "n_alpha": 32, "n_rho": 32, "n_omega": 32}}"#)
}

#[test]
fn basis_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b0");
    ok(&["basis", "--kappa", "0", "--nmax", "2", "--out", p(&out)]);
    let rows = csv_rows(&out.join("basis_radial.csv"));
    let z10: Vec<_> = rows.iter().filter(|r| r[0] == 1.0 && r[1] == 0.0).collect();
    assert!(!z10.is_empty());
    for r in z10 {
        assert!((r[3] - r[2]).abs() < 1e-15 && r[4] == 0.0, "{r:?}");
    }

    let out = dir.path().join("b5");
    ok(&["basis", "--kappa", "0.5", "--nmax", "4", "--out", p(&out)]);
    for r in csv_rows(&out.join("basis_radial.csv")).iter().filter(|r| r[2] == 0.0) {
        // Z_{n,k}(0) is 1 on the diagonal n = 2k and 0 elsewhere
        let z0 = if r[0] == 2.0 * r[1] { 1.0 } else { 0.0 };
        assert!((r[3] - (1.0f64 / 3.0).sqrt() * z0).abs() < 1e-15, "{r:?}");
    }
    let fiber = csv_rows(&out.join("basis_fiber.csv"));
    assert_eq!(fiber.len(), 15 * 129);

    let out = dir.path().join("empty");
    ok(&["basis", "--nmax=-1", "--out", p(&out)]);
    assert_eq!(std::fs::read_to_string(out.join("basis_radial.csv")).unwrap(), "n,k,rho,re,im\n");
}

#[test]
fn unit_phantom_gives_exit_times() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_grid(0.3, 4));
    let out = dir.path().join("f");
    ok(&["forward", "--config", p(&cfg), "--out", p(&out)]);
    let c = cp(0.3);
    for r in csv_rows(&out.join("sinogram.csv")) {
        assert!((r[2] - exit_time(r[1], &c).unwrap()).abs() < 1e-12 && r[3].abs() < 1e-15, "{r:?}");
    }
    let side = json(&out.join("forward.json"));
    assert_eq!(side["quadrature"]["forward_nodes_per_panel"], 16);
    assert_eq!(side["quadrature"]["forward_max_panels"], 4);
}

#[test]
fn single_mode_coefficient_file() {
    let dir = tempfile::tempdir().unwrap();
    let k = -0.4;
    let coeffs = dir.path().join("c.json");
    std::fs::write(&coeffs, format!(r#"{{"kappa": {k}, "nmax": 0, "entries": [{{"n": 0, "k": 0, "re": 1.0, "im": 0.0}}]}}"#)).unwrap();
    let cfg = write_config(dir.path(), &small_grid(k, 4));
    let out = dir.path().join("f");
    ok(&["forward", "--config", p(&cfg), "--phantom", p(&coeffs), "--out", p(&out)]);
    let c = cp(k);
    let s = sigma(0, &c);
    for r in csv_rows(&out.join("sinogram.csv")) {
        let expected = s * psi_hat(BasisIndex::new(0, 0), r[0], r[1], &c);
        assert!((Complex64::new(r[2], r[3]) - expected).norm() < 1e-9, "{r:?}");
    }
}

#[test]
fn runs_are_deterministic_and_hashes_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &small_grid(0.2, 4));
    // the output path is part of the config, so both runs write to the same place
    let a = dir.path().join("a");
    let files = ["sinogram.csv", "forward.json", "config.json", "inv/reconstruction.csv", "inv/coefficients.json", "inv/invert.json"];
    let mut first = Vec::new();
    for run in 0..2 {
        ok(&["forward", "--config", p(&cfg), "--noise", "0.01", "--seed", "7", "--out", p(&a)]);
        ok(&["invert", "--config", p(&cfg), "--input", p(&a.join("sinogram.csv")), "--out", p(&a.join("inv"))]);
        let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(a.join(f)).unwrap()).collect();
        if run == 0 {
            first = bytes;
        } else {
            for (f, (x, y)) in files.iter().zip(first.iter().zip(&bytes)) {
                assert_eq!(x, y, "{f}");
            }
        }
    }
    for (dir, side) in [(a.clone(), "forward.json"), (a.join("inv"), "invert.json")] {
        let text = std::fs::read_to_string(dir.join("config.json")).unwrap();
        let recorded = json(&dir.join(side))["config_hash"].as_str().unwrap().to_string();
        let digest: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(digest, recorded);
        assert_eq!(RunConfig::from_json(&text).unwrap().hash(), recorded);
    }
    // a different seed changes the data
    let c = dir.path().join("c");
    ok(&["forward", "--config", p(&cfg), "--noise", "0.01", "--seed", "8", "--out", p(&c)]);
    assert_ne!(std::fs::read(a.join("sinogram.csv")).unwrap(), std::fs::read(c.join("sinogram.csv")).unwrap());
}

#[test]
fn round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();

    // Euclidean unit phantom is the single mode Z_{0,0}
    let f = dir.path().join("f0");
    ok(&["forward", "--kappa", "0", "--out", p(&f)]);
    let inv = dir.path().join("i0");
    ok(&["invert", "--kappa", "0", "--input", p(&f.join("sinogram.csv")), "--out", p(&inv)]);
    let rows = csv_rows(&inv.join("reconstruction.csv"));
    let err = rows.iter().map(|r| (r[2] - 1.0).powi(2) + r[3].powi(2)).sum::<f64>().sqrt() / (rows.len() as f64).sqrt();
    assert!(err < 1e-6, "{err}");

    // random band-limited phantom at nmax = 6
    let k = 0.4;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut truth = CoeffTable::new(k, 6);
    for idx in disk_indices(6) {
        truth.insert(idx, Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).unwrap();
    }
    let coeffs = dir.path().join("c.json");
    std::fs::write(&coeffs, io::coeff_json(&truth)).unwrap();
    let f = dir.path().join("f");
    ok(&["forward", "--kappa", "0.4", "--phantom", p(&coeffs), "--out", p(&f)]);
    let inv = dir.path().join("i");
    ok(&["invert", "--kappa", "0.4", "--input", p(&f.join("sinogram.csv")), "--out", p(&inv)]);
    let got = io::read_coeffs(&inv.join("coefficients.json")).unwrap();
    let rel = got.max_abs_diff(&truth) / truth.norm_sqr().sqrt();
    assert!(rel < 1e-6, "{rel}");

    let phantom = ZernikeExpansion::new(&truth, &cp(k), true);
    let (mut num, mut den) = (0.0, 0.0);
    for r in csv_rows(&inv.join("reconstruction.csv")) {
        use geoxray::xray::DiskFunction;
        let t = phantom.eval(Complex64::from_polar(r[0], r[1]));
        num += (Complex64::new(r[2], r[3]) - t).norm_sqr();
        den += t.norm_sqr();
    }
    assert!((num / den).sqrt() < 1e-6);

    let report = json(&inv.join("invert.json"));
    assert_eq!(report["accepted_modes"], 28);
    assert_eq!(report["moments"]["in_range"], true);
    assert!(report["relative_residual"].as_f64().unwrap() < 1e-6);
    let predicted = 7f64.sqrt() * 0.6f64.sqrt() / (2.0 * std::f64::consts::PI.sqrt());
    assert!((report["noise_amplification"].as_f64().unwrap() - predicted).abs() < 1e-12);
}

#[test]
fn zero_sinogram_inverts_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let c = cp(-0.3);
    let g = BoundaryGrid::new(24, 32, &c).unwrap();
    let input = dir.path().join("zero.csv");
    io::write_text(&input, &io::sinogram_csv(&g)).unwrap();
    let cfg = write_config(dir.path(), &small_grid(-0.3, 5));
    let out = dir.path().join("i");
    ok(&["invert", "--config", p(&cfg), "--input", p(&input), "--out", p(&out)]);
    assert!(csv_rows(&out.join("reconstruction.csv")).iter().all(|r| r[2] == 0.0 && r[3] == 0.0));
    let proj = dir.path().join("p");
    ok(&["project", "--config", p(&cfg), "--input", p(&input), "--out", p(&proj)]);
    assert!(csv_rows(&proj.join("projected.csv")).iter().all(|r| r[2] == 0.0 && r[3] == 0.0));
}

#[test]
fn projection_and_moments_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let k = 0.5;
    let c = cp(k);
    let cfg = write_config(dir.path(), &small_grid(k, 6));
    let g = BoundaryGrid::new(24, 32, &c).unwrap();

    let range = dir.path().join("range.csv");
    let f = ZernikeExpansion::single(BasisIndex::new(2, 1), &c, true).unwrap();
    let u = sinogram(&f, &g, &c, &ForwardQuad::default()).unwrap();
    io::write_text(&range, &io::sinogram_csv(&u)).unwrap();
    let out = dir.path().join("p");
    ok(&["project", "--config", p(&cfg), "--input", p(&range), "--out", p(&out)]);
    assert!(json(&out.join("project.json"))["relative_residual"].as_f64().unwrap() < 1e-6);
    let back = io::read_sinogram(&out.join("projected.csv"), &g).unwrap();
    assert!(back.difference(&u).unwrap().norm() < 1e-6 * u.norm());

    let out = dir.path().join("m");
    ok(&["moments", "--config", p(&cfg), "--input", p(&range), "--out", p(&out)]);
    let rows = csv_rows(&out.join("moments.csv"));
    assert_eq!(rows.len(), 7 * 6);
    assert!(rows.iter().all(|r| r[2] < 1e-7 * u.norm()));
    assert_eq!(json(&out.join("moments.json"))["in_range"], true);

    // pure co-kernel mode
    let cok = dir.path().join("cok.csv");
    let v = g.zeros_like().sampled(&|b: f64, a: f64| u_prime(4, 1, b, a, &c));
    io::write_text(&cok, &io::sinogram_csv(&v)).unwrap();
    let out = dir.path().join("pc");
    ok(&["project", "--config", p(&cfg), "--input", p(&cok), "--out", p(&out)]);
    let r = json(&out.join("project.json"))["relative_residual"].as_f64().unwrap();
    assert!((r - 1.0).abs() < 1e-6, "{r}");

    // a single non-range psi shows up at its own index only
    let psi = dir.path().join("psi.csv");
    let w = g.zeros_like().sampled(&|b: f64, a: f64| psi_kappa(BasisIndex::new(3, -1), b, a, &c));
    io::write_text(&psi, &io::sinogram_csv(&w)).unwrap();
    let out = dir.path().join("mp");
    ok(&["moments", "--config", p(&cfg), "--input", p(&psi), "--out", p(&out)]);
    for r in csv_rows(&out.join("moments.csv")) {
        let expected = if (r[0], r[1]) == (3.0, -1.0) { 1.0 / (4.0 * (1.0 + k)) } else { 0.0 };
        assert!((r[2] - expected).abs() < 1e-9, "{r:?}");
    }
    assert_eq!(json(&out.join("moments.json"))["in_range"], false);
}

#[test]
fn configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let r = geoxray(&["selftest", "--kappa", "1.5", "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());

    let cfg = write_config(dir.path(), r#"{"kappa": 0.1, "bogus": 3}"#);
    assert_eq!(geoxray(&["spectrum", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"kappa": 0.1, "n_alpha": 0}"#);
    assert_eq!(geoxray(&["spectrum", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(geoxray(&["invert", "--out", p(&out)]).status.code(), Some(2));
    assert!(!out.exists());

    // sinogram written for another grid
    let f = dir.path().join("f");
    ok(&["forward", "--config", p(&write_config(dir.path(), &small_grid(0.0, 4))), "--out", p(&f)]);
    let r = geoxray(&["invert", "--input", p(&f.join("sinogram.csv")), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("grid mismatch"));

    // malformed coefficient file
    let coeffs = dir.path().join("bad.json");
    std::fs::write(&coeffs, "{\n  \"kappa\": 0.0,\n  \"nmax\": 2,\n  \"entries\": [\n    {\"n\": 2, \"k\": 5, \"re\": 1.0}\n  ]\n}\n").unwrap();
    let r = geoxray(&["forward", "--phantom", p(&coeffs), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 5"), "{}", String::from_utf8_lossy(&r.stderr));

    let r = geoxray(&["invert", "--input", p(&dir.path().join("missing.csv")), "--out", p(&out)]);
    assert_eq!(r.status.code(), Some(4));
}

#[test]
fn selftest_passes_by_default_and_warns_near_degeneracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["selftest", "--out", p(&dir.path().join("s"))]);
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("PASS") && !table.contains("FAIL"));
    assert_eq!(json(&dir.path().join("s/selftest.json"))["all_pass"], true);

    let r = geoxray(&["selftest", "--kappa", "0.999", "--out", p(&dir.path().join("w"))]);
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("near-degenerate") && err.contains("5.0e-4"), "{err}");
    assert_ne!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stdout).contains("Euclidean degeneration"));
}

#[test]
fn spectrum_lists_singular_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    ok(&["spectrum", "--kappa", "-0.6", "--nmax", "3", "--out", p(&out)]);
    let text = std::fs::read_to_string(out.join("spectrum.csv")).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    for r in rows {
        let expected = 2.0 * std::f64::consts::PI.sqrt() / (1.6f64.sqrt() * (r[0] + 1.0).sqrt());
        assert!((r[2] - expected).abs() < 1e-15);
    }
}
