use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn taskrd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_taskrd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = taskrd(args);
    assert!(
        out.status.success(),
        "taskrd {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Curves CSV grouped by method as `(distortion, rate)` pairs.
fn parse_curves(text: &str) -> BTreeMap<String, Vec<(f64, f64)>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,lambda,rate_bits,distortion,bpp,flags"));
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 6, "{line}");
        out.entry(f[0].to_string())
            .or_default()
            .push((f[3].parse().unwrap(), f[2].parse().unwrap()));
    }
    out
}

fn interpolate(curve: &[(f64, f64)], d: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let ((d0, r0), (d1, r1)) = (w[0], w[1]);
        (d0 <= d && d <= d1).then(|| if d1 == d0 { r0.min(r1) } else { r0 + (r1 - r0) * (d - d0) / (d1 - d0) })
    })
}

fn write_identity_counts(path: &Path, k: usize) {
    let mut text = String::new();
    for i in 0..k {
        let row: Vec<String> = (0..k).map(|j| if i == j { "50" } else { "0" }.to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

#[test]
fn closed_form_uniform_classes() {
    let out = stdout_of(&["closed-form", "--kind", "uniform", "--classes", "1000", "--d", "0.239"]);
    let rate: f64 = out.trim().strip_prefix("rate_bits=").unwrap().parse().unwrap();
    assert!((rate - 6.790933461).abs() < 1e-7, "{out}");
}

#[test]
fn closed_form_reports_bits_per_pixel() {
    let out = stdout_of(&[
        "closed-form", "--kind", "binary", "--q", "0.5", "--d", "0.11", "--pixels", "784",
    ]);
    let bpp = out.lines().find_map(|l| l.strip_prefix("bpp=")).expect("bpp line");
    let rate = out.lines().find_map(|l| l.strip_prefix("rate_bits=")).unwrap();
    let (bpp, rate): (f64, f64) = (bpp.parse().unwrap(), rate.parse().unwrap());
    assert!((bpp - rate / 784.0).abs() < 1e-9);
}

#[test]
fn perfect_classifier_makes_iec_coincide_with_ord() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("identity.csv");
    write_identity_counts(&cm, 10);
    let text = stdout_of(&["class-bounds", "--confusion", cm.to_str().unwrap(), "--methods", "ord,iec"]);
    let curves = parse_curves(&text);
    assert_eq!(curves.keys().collect::<Vec<_>>(), ["iec", "ord"]);
    // Uniform ten-class Hamming rate-distortion function.
    let exact = |d: f64| {
        if d >= 0.9 {
            0.0
        } else if d <= 0.0 {
            10f64.log2()
        } else {
            10f64.log2() + d * d.log2() + (1.0 - d) * (1.0 - d).log2() - d * 9f64.log2()
        }
    };
    for name in ["iec", "ord"] {
        for &(d, r) in &curves[name] {
            assert!((exact(d) - r).abs() < 1e-6, "{name} at D={d}: {r} vs {}", exact(d));
        }
    }
}

#[test]
fn class_bounds_pixels_adds_bpp_column() {
    let dir = tempfile::tempdir().unwrap();
    let cm = dir.path().join("identity.csv");
    write_identity_counts(&cm, 4);
    let text = stdout_of(&[
        "class-bounds", "--confusion", cm.to_str().unwrap(), "--methods", "ts", "--pixels", "1024",
    ]);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (rate, bpp): (f64, f64) = (f[2].parse().unwrap(), f[4].parse().unwrap());
        assert!((bpp - rate / 1024.0).abs() < 1e-9, "{line}");
    }
}

#[test]
fn gaussian_mixture_curves_are_ordered() {
    let text = stdout_of(&["gmm", "--lambda-points", "25", "--d-points", "51"]);
    let curves = parse_curves(&text);
    for name in ["ord", "ird", "ec", "ce"] {
        assert!(curves.contains_key(name), "missing {name}");
    }
    // Each lower curve is checked at its own samples against the chords of the upper
    // one; chords of a convex curve never undercut it.
    let below = |lower: &str, upper: &str| {
        for &(d, r) in &curves[lower] {
            if let Some(u) = interpolate(&curves[upper], d) {
                assert!(r <= u + 1e-6, "D={d}: {lower} {r} above {upper} {u}");
            }
        }
    };
    below("ord", "ird");
    below("ird", "ec");
    below("ird", "ce");
}

#[test]
fn ba_subcommand_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let pmf = dir.path().join("p.csv");
    let dist = dir.path().join("d.csv");
    fs::write(&pmf, "0.5\n0.5\n").unwrap();
    fs::write(&dist, "0,1\n1,0\n").unwrap();
    let out = dir.path().join("curve.csv");
    stdout_of(&[
        "ba", "--pmf", pmf.to_str().unwrap(), "--distortion", dist.to_str().unwrap(),
        "--out", out.to_str().unwrap(), "--lambda-points", "15",
    ]);
    let curves = parse_curves(&fs::read_to_string(&out).unwrap());
    let pts = curves.values().next().unwrap();
    for &(d, r) in pts {
        let h = if d <= 0.0 || d >= 0.5 {
            0.0
        } else {
            -d * d.log2() - (1.0 - d) * (1.0 - d).log2()
        };
        assert!((r - (1.0 - h).max(0.0)).abs() < 1e-6, "D={d}: {r}");
    }
}

#[test]
fn synth_and_snc_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let logits = dir.path().join(format!("logits{run}.csv"));
        let curve = dir.path().join(format!("snc{run}.csv"));
        stdout_of(&[
            "synth", "--kind", "dirichlet", "--n", "400", "--classes", "5", "--seed", "3",
            "--out", logits.to_str().unwrap(),
        ]);
        stdout_of(&[
            "snc", "--logits", logits.to_str().unwrap(), "--lambda-points", "12",
            "--out", curve.to_str().unwrap(),
        ]);
        outputs.push((fs::read(&logits).unwrap(), fs::read(&curve).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].1.clone()).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with("empirical") || l.contains("empirical;")));
}

#[test]
fn failure_leaves_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2\n3\n").unwrap();
    let out = dir.path().join("never.csv");
    let res = taskrd(&["class-bounds", "--confusion", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    assert!(!out.exists());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1, "stray temporary file");
}

#[test]
fn missing_input_is_reported_with_its_path() {
    let res = taskrd(&["snc", "--logits", "/nonexistent/logits.csv"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/nonexistent/logits.csv"));
}

#[test]
fn help_documents_units() {
    let help = stdout_of(&["class-bounds", "--help"]);
    for flag in ["--confusion", "--prior", "--methods", "--lambda-min", "--tol", "--pixels", "--out"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
    assert!(help.contains("nats per unit distortion"));
    assert!(help.contains("bits"));
}

#[test]
fn unknown_flag_is_rejected() {
    let res = taskrd(&["gmm", "--no-such-flag"]);
    assert!(!res.status.success());
    assert!(res.stdout.is_empty());
}
