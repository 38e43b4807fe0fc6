use std::path::Path;
use std::process::{Command, Output};

use eventfeat::benchmark;

const SMALL: &str = "\
sensor_width = 34
sensor_height = 34
intervals = 4
volume = 2x8x8
stride = 4
formulation = direct
basis_size = 8
sample_count = 400
direct.iterations = 3
svm.folds = 2
metrics.timing = false
dump.count = 4
";

fn eventfeat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventfeat")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = eventfeat(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup(root: &Path, extra: &str) -> (String, String) {
    let data = root.join("data");
    benchmark::make_benchmark(21, &data, 8, 4).unwrap();
    let conf = root.join("small.conf");
    let grid = if extra.contains("svm.grid") { "" } else { "svm.grid = 0.1,10\n" };
    std::fs::write(&conf, format!("{SMALL}{grid}{extra}")).unwrap();
    (conf.display().to_string(), data.display().to_string())
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn staged_commands_write_model_features_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, data) = setup(dir.path(), "");
    let out = dir.path().join("out").display().to_string();
    let common = ["--config", &conf, "--dataset", &data, "--out", &out];
    for cmd in ["learn-basis", "encode", "train-classifier", "evaluate", "dump-basis"] {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        ok(&args);
    }
    let out = Path::new(&out);
    let rows = csv_rows(&out.join("metrics.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][..7], ["evaluate", "direct", "8", "8", "8", "2", "4"]);
    assert_eq!(rows[0][8], "0.000");
    assert_eq!(csv_rows(&out.join("per_class.csv")).len(), 4);
    assert_eq!(csv_rows(&out.join("confusion.csv")).len(), 4);
    assert!(out.join("basis.png").is_file());
    let model = out.join("model.evft").display().to_string();
    assert!(ok(&["inspect", &model]).contains("direct transform, K = 8, d = 128"));
    let features = out.join("features.evff").display().to_string();
    assert!(ok(&["inspect", &features]).contains("32 train, 16 test, dimension 32"));
    let rec = Path::new(&data).join("train/hbar/0000.bin").display().to_string();
    assert!(ok(&["inspect", &rec, "--config", &conf]).starts_with("events: "));
}

#[test]
fn evaluating_on_the_training_set_gives_a_perfect_row() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, data) = setup(dir.path(), "svm.grid = 100\n");
    // Score the training recordings themselves.
    let data = Path::new(&data);
    std::fs::remove_dir_all(data.join("test")).unwrap();
    copy_dir(&data.join("train"), &data.join("test"));
    let out = dir.path().join("out").display().to_string();
    let data = data.display().to_string();
    for cmd in ["learn-basis", "encode", "train-classifier", "evaluate"] {
        ok(&[cmd, "--config", &conf, "--dataset", &data, "--out", &out]);
    }
    let rows = csv_rows(&Path::new(&out).join("metrics.csv"));
    assert_eq!(rows[0][7], "1.000000");
}

fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        let target = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_dir(&p, &target);
        } else {
            std::fs::copy(&p, &target).unwrap();
        }
    }
}

#[test]
fn sweep_writes_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, data) = setup(dir.path(), "sweep.basis_size = 4,8\n");
    let out = dir.path().join("out").display().to_string();
    ok(&["sweep", "--config", &conf, "--dataset", &data, "--out", &out]);
    let rows = csv_rows(&Path::new(&out).join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0].as_str(), rows[0][2].as_str()), ("basis_size=4", "4"));
    assert_eq!((rows[1][0].as_str(), rows[1][2].as_str()), ("basis_size=8", "8"));
}

#[test]
fn identical_inputs_give_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (conf, data) = setup(dir.path(), "");
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "3"].iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let run = Command::new(env!("CARGO_BIN_EXE_eventfeat"))
            .args(["run", "--config", &conf, "--dataset", &data, "--formulation", "inverse", "--seed", "9"])
            .arg("--out")
            .arg(&out)
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
        outputs.push(out);
    }
    for name in ["model.evft", "features.evff", "metrics.csv", "per_class.csv", "confusion.csv"] {
        let a = std::fs::read(outputs[0].join(name)).unwrap();
        let b = std::fs::read(outputs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn synth_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("synth").display().to_string();
    ok(&["synth", "--seed", "4", "--out", &out]);
    for class in benchmark::CLASSES {
        let train = std::fs::read_dir(Path::new(&out).join("train").join(class)).unwrap().count();
        let test = std::fs::read_dir(Path::new(&out).join("test").join(class)).unwrap().count();
        assert_eq!((train, test), (benchmark::TRAIN_PER_CLASS, benchmark::TEST_PER_CLASS));
    }
    let sample = Path::new(&out).join("test/blob/0042.bin");
    let expected = eventfeat_core::events::write_event_file(&benchmark::render_recording(4, 3, 42, true)).unwrap();
    assert_eq!(std::fs::read(sample).unwrap(), expected);
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "volume = 9x12x12\n").unwrap();
    let bad = bad.display().to_string();
    let missing = dir.path().join("missing").display().to_string();
    let out = dir.path().join("out").display().to_string();

    let code = |args: &[&str]| eventfeat(args).status.code();
    let err = eventfeat(&["learn-basis", "--config", &bad, "--out", &out]);
    assert_eq!(err.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&err.stderr).contains("volume"));
    assert_eq!(code(&["learn-basis", "--formulation", "sideways", "--out", &out]), Some(2));
    assert_eq!(code(&["learn-basis", "--out", &out]), Some(2), "no dataset configured");
    assert_eq!(code(&["learn-basis", "--dataset", &missing, "--out", &out]), Some(3));
    assert_eq!(code(&["evaluate", "--out", &missing]), Some(3));
    assert_eq!(code(&["no-such-command"]), Some(2));
}
