use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_floorplan");

const BLOCKS: &str = "\
UCLA blocks 1.0

NumSoftRectangularBlocks : 6
NumHardRectilinearBlocks : 0
NumTerminals : 2

sb0 softrectangular 16 0.5 2.0
sb1 softrectangular 12 0.5 2.0
sb2 softrectangular 9 0.5 2.0
sb3 softrectangular 9 0.5 2.0
sb4 softrectangular 6 0.5 2.0
sb5 softrectangular 4 0.5 2.0

p0 terminal
p1 terminal
";

const NETS: &str = "\
UCLA nets 1.0

NumNets : 4
NumPins : 9

NetDegree : 2
sb0 B
sb1 B
NetDegree : 3
sb1 B
sb2 B
p0 B
NetDegree : 2
sb3 B
sb4 B
NetDegree : 2
sb5 B
p1 B
";

const PL: &str = "\
UCLA pl 1.0

p0 0 0
p1 8 8
";

fn fixture_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fpcli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("toy.blocks"), BLOCKS).unwrap();
    fs::write(dir.join("toy.nets"), NETS).unwrap();
    fs::write(dir.join("toy.pl"), PL).unwrap();
    dir
}

fn run_toy(dir: &Path, out: &Path, extra: &[&str]) -> std::process::Output {
    Command::new(BIN)
        .arg("--blocks")
        .arg(dir.join("toy.blocks"))
        .arg("--nets")
        .arg(dir.join("toy.nets"))
        .arg("--pl")
        .arg(dir.join("toy.pl"))
        .arg("--out")
        .arg(out)
        .args(["--grid", "32", "--kmax", "400", "--seed", "5"])
        .args(extra)
        .output()
        .unwrap()
}

fn metric(metrics: &str, key: &str) -> String {
    metrics
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("missing {key} in metrics"))
        .to_string()
}

#[test]
fn end_to_end_produces_legal_layout_and_reports() {
    let dir = fixture_dir("e2e");
    let out = dir.join("run");
    let res = run_toy(&dir, &out, &["--svg", "--dump-grids"]);
    assert!(
        res.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&res.stdout),
        String::from_utf8_lossy(&res.stderr)
    );

    let metrics = fs::read_to_string(out.join("metrics.txt")).unwrap();
    assert_eq!(metric(&metrics, "legal"), "true");
    assert_eq!(metric(&metrics, "modules"), "6");
    let pct: f64 = ["phase_initial_pct", "phase_global_pct", "phase_legalize_pct"]
        .iter()
        .map(|k| metric(&metrics, k).parse::<f64>().unwrap())
        .sum();
    assert!((pct - 100.0).abs() < 0.1, "phase percentages sum to {pct}");

    let pl = fs::read_to_string(out.join("result.pl")).unwrap();
    assert_eq!(pl.lines().filter(|l| !l.starts_with('#')).count(), 6);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,hpwl,overlap_pct,lambda,step"));
    assert!(trace.lines().count() > 1);
    assert!(fs::read_to_string(out.join("layout.svg")).unwrap().contains("<svg"));
    let rho = fs::read_to_string(out.join("density.csv")).unwrap();
    assert_eq!(rho.lines().count(), 32);
    assert_eq!(rho.lines().next().unwrap().split(',').count(), 32);
    assert!(out.join("potential.csv").exists());

    fs::remove_dir_all(&dir).ok();
}

#[test]
fn same_seed_writes_identical_placements() {
    let dir = fixture_dir("det");
    let a = run_toy(&dir, &dir.join("a"), &[]);
    let b = run_toy(&dir, &dir.join("b"), &[]);
    assert!(a.status.success() && b.status.success());
    let pa = fs::read(dir.join("a/result.pl")).unwrap();
    let pb = fs::read(dir.join("b/result.pl")).unwrap();
    assert_eq!(pa, pb);
    fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = fixture_dir("bad");
    let missing = Command::new(BIN)
        .args(["--blocks", "/nonexistent.blocks", "--nets", "/nonexistent.nets"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let neg = run_toy(&dir, &dir.join("neg"), &["--whitespace", "-0.5"]);
    assert_eq!(neg.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&neg.stderr).contains("whitespace"));

    let garbled = dir.join("garbled.blocks");
    fs::write(&garbled, "UCLA blocks 1.0\nNumSoftRectangularBlocks : 1\n").unwrap();
    let parse = Command::new(BIN)
        .arg("--blocks")
        .arg(&garbled)
        .arg("--nets")
        .arg(dir.join("toy.nets"))
        .output()
        .unwrap();
    assert_eq!(parse.status.code(), Some(1));
    fs::remove_dir_all(&dir).ok();
}
