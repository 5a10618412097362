use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bnn_qubo::bnn::{BnnModel, SpinBit, WeightMatrix};
use serde_json::Value;
use tempfile::TempDir;

fn bnnq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bnnq")).args(args).output().expect("bnnq runs")
}

fn ok(args: &[&str]) -> String {
    let out = bnnq(args);
    assert!(
        out.status.success(),
        "bnnq {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Small deterministic generator so the fixture needs no RNG crate.
struct Lcg(u64);

impl Lcg {
    fn bit(&mut self) -> bool {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 62 & 1 == 1
    }

    fn spins(&mut self, n: usize) -> Vec<i8> {
        (0..n).map(|_| if self.bit() { 1 } else { -1 }).collect()
    }
}

/// A 7-3-3 network on 1x7 images with every one of the 128 inputs as a
/// sample, labelled with the network's own prediction.
struct Toy {
    _dir: TempDir,
    root: PathBuf,
}

impl Toy {
    fn new(seed: u64) -> Self {
        let mut g = Lcg(seed);
        let layers = vec![
            WeightMatrix::from_rows(&(0..3).map(|_| g.spins(7)).collect::<Vec<_>>()).unwrap(),
            WeightMatrix::from_rows(&(0..3).map(|_| g.spins(3)).collect::<Vec<_>>()).unwrap(),
        ];
        let model = BnnModel::new(layers)
            .unwrap()
            .with_geometry(bnn_qubo::bnn::InputGeometry {
                rows: 1,
                cols: 7,
                pad_length: 7,
            })
            .unwrap()
            .with_threshold(128);
        let dir = TempDir::new().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("model.json"), model.to_json()).unwrap();

        let mut images = vec![0, 0, 8, 3];
        images.extend(128u32.to_be_bytes());
        images.extend(1u32.to_be_bytes());
        images.extend(7u32.to_be_bytes());
        let mut labels = vec![0, 0, 8, 1];
        labels.extend(128u32.to_be_bytes());
        for m in 0..128u32 {
            let pixels: Vec<u8> = (0..7).map(|i| if m >> i & 1 == 1 { 255 } else { 0 }).collect();
            let spins: Vec<SpinBit> = pixels
                .iter()
                .map(|&p| if p == 255 { SpinBit::PLUS } else { SpinBit::MINUS })
                .collect();
            images.extend(&pixels);
            labels.push(model.predict(&spins).unwrap() as u8);
        }
        fs::write(root.join("images.idx"), images).unwrap();
        fs::write(root.join("labels.idx"), labels).unwrap();
        Toy { _dir: dir, root }
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn data(&self) -> Vec<String> {
        vec![
            "--model".into(),
            self.path("model.json"),
            "--images".into(),
            self.path("images.idx"),
            "--labels".into(),
            self.path("labels.idx"),
        ]
    }

    fn run(&self, cmd: &str, extra: &[&str]) -> String {
        let mut args = vec![cmd.to_string()];
        args.extend(self.data());
        args.extend(extra.iter().map(|s| s.to_string()));
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>())
    }
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oracle_agrees_with_brute_verify() {
    let mut compared = 0;
    for seed in [1u64, 2, 3] {
        let toy = Toy::new(seed);
        let out = toy.path("reports");
        toy.run(
            "verify",
            &["--pmax", "7", "--eps", "2", "--solver", "brute", "--batch", "0-127", "--jobs", "2", "--out-dir", &out],
        );
        for sample in (0..128).step_by(9) {
            let oracle: Value =
                serde_json::from_str(&toy.run("oracle", &["--pmax", "7", "--eps", "2", "--sample", &sample.to_string()]))
                    .unwrap();
            let report = read_json(&Path::new(&out).join(format!("report-{sample}.json")));
            match oracle["verdict"].as_str().unwrap() {
                "non_robust" => {
                    assert_eq!(report["verdict"]["kind"], "non_robust", "seed {seed} sample {sample}");
                    assert_eq!(report["reverse_check"]["perturbation_size"], oracle["min_flips"]);
                }
                _ => assert_eq!(report["verdict"]["kind"], "robust_within_model", "seed {seed} sample {sample}"),
            }
            compared += 1;
        }
    }
    assert_eq!(compared, 3 * 15);
}

#[test]
fn verify_reruns_are_byte_identical() {
    let toy = Toy::new(9);
    let run = |dir: &str| {
        let out = toy.path(dir);
        toy.run(
            "verify",
            &["--pmax", "5", "--eps", "2", "--solver", "fem", "--seed", "7", "--n-step", "200", "--sample", "5", "--out-dir", &out],
        );
        fs::read(Path::new(&out).join("report-5.json")).unwrap()
    };
    let first = run("a");
    assert_eq!(first, run("b"));
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["solver"]["seed"], 7);
    assert!(report.get("wall_time_secs").is_none());
}

#[test]
fn encode_then_solve_round_trip() {
    let toy = Toy::new(4);
    let dir = toy.path("enc");
    toy.run("encode", &["--pmax", "7", "--eps", "3", "--sample", "0", "--out-dir", &dir, "--export-ising"]);
    let qubo = fs::read_to_string(Path::new(&dir).join("instance.qubo")).unwrap();
    let map = read_json(&Path::new(&dir).join("instance.map.json"));
    let vars = map["meta"]["num_vars"].as_u64().unwrap();
    assert!(qubo.contains(&format!("c vars {vars} constraints {}", map["meta"]["num_constraints"])));
    assert!(qubo.lines().any(|l| l.starts_with(&format!("p qubo {vars} "))));
    assert_eq!(map["variables"].as_array().unwrap().len() as u64, vars);
    let ising = fs::read_to_string(Path::new(&dir).join("instance.ising")).unwrap();
    assert!(ising.lines().any(|l| l.starts_with(&format!("p ising {vars} "))));

    let qubo_path = Path::new(&dir).join("instance.qubo").display().to_string();
    let exact: Value = serde_json::from_str(&ok(&["solve", "--qubo", &qubo_path, "--solver", "brute"])).unwrap();
    let sa: Value =
        serde_json::from_str(&ok(&["solve", "--qubo", &qubo_path, "--solver", "sa", "--seed", "3"])).unwrap();
    assert_eq!(exact["result"]["proven_optimal"], true);
    assert_eq!(sa["config"]["seed"], 3);
    assert!(sa["result"]["best_energy"].as_f64().unwrap() >= exact["result"]["best_energy"].as_f64().unwrap());
}

#[test]
fn report_draws_the_witness() {
    let toy = Toy::new(2);
    let out = toy.path("r");
    toy.run("verify", &["--pmax", "7", "--eps", "3", "--solver", "brute", "--sample", "0", "--out-dir", &out]);
    let report_path = Path::new(&out).join("report-0.json").display().to_string();
    let text = toy.run("report", &["--report", &report_path]);
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("label "));
    let pgm = toy.run("report", &["--report", &report_path, "--format", "pgm", "--scale", "2"]);
    assert!(pgm.starts_with("P2\n14 2\n255\n"));
}

#[test]
fn exit_codes() {
    let toy = Toy::new(5);
    let code = |args: Vec<String>| bnnq(&args.iter().map(String::as_str).collect::<Vec<_>>()).status.code();
    let with = |cmd: &str, extra: &[&str]| {
        let mut a = vec![cmd.to_string()];
        a.extend(toy.data());
        a.extend(extra.iter().map(|s| s.to_string()));
        a
    };

    assert_eq!(code(vec!["frobnicate".into()]), Some(2));
    assert_eq!(code(with("verify", &["--pmax", "3"])), Some(2));
    assert_eq!(
        code(vec!["infer".into(), "--model".into(), toy.path("missing.json"), "--images".into(), toy.path("images.idx"), "--labels".into(), toy.path("labels.idx")]),
        Some(3)
    );
    fs::write(toy.root.join("bad.json"), "{ not json").unwrap();
    assert_eq!(
        code(vec!["infer".into(), "--model".into(), toy.path("bad.json"), "--images".into(), toy.path("images.idx"), "--labels".into(), toy.path("labels.idx")]),
        Some(3)
    );
    assert_eq!(code(with("oracle", &["--pmax", "7", "--eps", "2", "--sample", "0", "--cap", "4"])), Some(4));
    assert_eq!(
        code(with("verify", &["--pmax", "7", "--eps", "2", "--sample", "0", "--solver", "brute", "--cap", "4", "--width-cap", "1", "--out-dir", &toy.path("x")])),
        Some(4)
    );
    assert_eq!(code(with("infer", &["--sample", "0"])), Some(0));
}
