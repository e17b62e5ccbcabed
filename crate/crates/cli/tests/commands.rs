use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hklut::dataset::{read_png, write_png};
use hklut::eval::modcrop;
use hklut::resample::make_lr;
use hklut::{classical_upscale, Image, ImagePlane, Interpolation, RgbImage};

fn hklut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hklut")).args(args).env_remove("HKLUT_DATASETS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn make(dir: &Path, kind: &str, layout: &str) -> PathBuf {
    let path = dir.join(format!("{}-{layout}.hklut", kind.replace(':', "_")));
    stdout(&hklut(&["make-ref-lut", "--kind", kind, "--layout", layout, "-o", s(&path)]));
    path
}

fn rgb(h: usize, w: usize, seed: u32) -> Image {
    let data = (0..h * w * 3).map(|i| ((i as u32).wrapping_mul(2654435761).wrapping_add(seed) >> 24) as u8).collect();
    Image::Rgb(RgbImage::new(h, w, data).unwrap())
}

#[test]
fn size_command() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(stdout(&hklut(&["size", s(&make(dir.path(), "zero", "hklut-s"))])), "100.0 KB (102400 B)\n");
    assert_eq!(stdout(&hklut(&["size", s(&make(dir.path(), "zero", "hklut-l"))])), "112.5 KB (115200 B)\n");
    assert_eq!(stdout(&hklut(&["size", "--layout", "1x4"])), "212.5 KB (217600 B)\n");

    let empty = dir.path().join("empty.hklut");
    fs::write(&empty, b"HKLT\x01\x00").unwrap();
    assert_eq!(stdout(&hklut(&["size", s(&empty)])), "0 B (0 B)\n");
}

#[test]
fn zero_model_upscale_equals_nearest() {
    let dir = tempfile::tempdir().unwrap();
    let model = make(dir.path(), "zero", "hklut-s");
    let input = dir.path().join("in.png");
    let img = rgb(9, 13, 1);
    write_png(&img, &input).unwrap();
    let out = dir.path().join("out");
    stdout(&hklut(&["upscale", "--model", s(&model), "--out", s(&out), s(&input)]));
    let want = img.map_planes(|p| Ok::<_, ()>(classical_upscale(p, 4, Interpolation::Nearest))).unwrap();
    assert_eq!(read_png(&out.join("in.png")).unwrap(), want);
}

#[test]
fn upscale_shape_and_channel_modes() {
    let dir = tempfile::tempdir().unwrap();
    let model = make(dir.path(), "random:3", "hklut-s");
    let input = dir.path().join("frame.png");
    write_png(&rgb(36, 64, 2), &input).unwrap();
    let gray = dir.path().join("gray.png");
    write_png(&Image::Gray(ImagePlane::filled(5, 3, 90)), &gray).unwrap();
    for channels in ["rgb", "y"] {
        let out = dir.path().join(channels);
        stdout(&hklut(&["upscale", "--model", s(&model), "--channels", channels, "-o", s(&out), s(&input), s(&gray)]));
        assert_eq!(read_png(&out.join("frame.png")).unwrap().dims(), (144, 256));
        assert!(matches!(read_png(&out.join("gray.png")).unwrap(), Image::Gray(_)));
    }
    let first = fs::read(dir.path().join("rgb/frame.png")).unwrap();
    stdout(&hklut(&["upscale", "--model", s(&model), "-o", s(&dir.path().join("again")), s(&input)]));
    assert_eq!(fs::read(dir.path().join("again/frame.png")).unwrap(), first);
}

#[test]
fn constant_model_shifts_by_twice_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let model = make(dir.path(), "constant:5", "2");
    let input = dir.path().join("in.png");
    let img = Image::Gray(ImagePlane::from_fn(4, 4, |y, x| (y * 80 + x * 20) as u8));
    write_png(&img, &input).unwrap();
    let out = dir.path().join("out");
    stdout(&hklut(&["upscale", "--model", s(&model), "-o", s(&out), s(&input)]));
    let Image::Gray(src) = img else { unreachable!() };
    let want = ImagePlane::from_fn(8, 8, |y, x| src.get(y / 2, x / 2).saturating_add(10));
    assert_eq!(read_png(&out.join("in.png")).unwrap(), Image::Gray(want));
}

#[test]
fn verify_is_seed_stable_and_catches_corruption() {
    let a = stdout(&hklut(&["verify", "--random", "3", "--seed", "9", "--images", "3"]));
    let b = stdout(&hklut(&["verify", "--random", "3", "--seed", "9", "--images", "3"]));
    assert_eq!(a, b);
    assert!(a.contains("all 3 models passed"));

    let dir = tempfile::tempdir().unwrap();
    let model = make(dir.path(), "diff", "hklut-s");
    stdout(&hklut(&["verify", s(&model)]));
    let mut bytes = fs::read(&model).unwrap();
    // Header, stage header, kernel count, n, v, three offsets: entries start at byte 17.
    bytes[17 + 1000] = 0x80;
    fs::write(&model, bytes).unwrap();
    let o = hklut(&["verify", s(&model)]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stage 0 msb kernel 0") && err.contains("table entry 1000"), "{err}");
}

#[test]
fn inspect_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let model = make(dir.path(), "gradient", "hklut-l");
    let text = stdout(&hklut(&["inspect", s(&model)]));
    assert!(text.contains("kind: gradient"));
    assert!(text.contains("stages: 3, total upscale x4"));
    assert!(text.trim_end().ends_with("total 112.5 KB (115200 B)"));
    let bench = stdout(&hklut(&["bench", s(&model), "--height", "8", "--width", "12", "--repeats", "3"]));
    assert!(bench.starts_with("12x8 -> 48x32, 3 runs on 1 thread(s): "), "{bench}");
    assert!(bench.contains(" ± "));
}

#[test]
fn bad_invocations_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!hklut(&["size", s(&dir.path().join("missing.hklut"))]).status.success());
    assert!(!hklut(&["make-ref-lut", "--kind", "constant:-128", "-o", s(&dir.path().join("x"))]).status.success());
    assert!(!hklut(&["make-ref-lut", "--kind", "zero", "--layout", "2x0", "-o", s(&dir.path().join("x"))])
        .status
        .success());
    let o = hklut(&["eval", "--method", "bicubic", "--root", s(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Set5"));
}

#[test]
fn eval_on_a_local_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("Mini");
    fs::create_dir_all(set.join("HR")).unwrap();
    fs::create_dir_all(set.join("LR_bicubic/X4")).unwrap();
    for (i, name) in ["one", "two"].iter().enumerate() {
        let hr = rgb(40 + i * 3, 44, i as u32);
        write_png(&hr, &set.join(format!("HR/{name}.png"))).unwrap();
        let lr = modcrop(&hr, 4).map_planes(|p| Ok::<_, ()>(make_lr(p, 4))).unwrap();
        write_png(&lr, &set.join(format!("LR_bicubic/X4/{name}x4.png"))).unwrap();
    }
    let kv = dir.path().join("report.txt");
    let energy = dir.path().join("energy.toml");
    fs::write(&energy, "lookup = 1.0\n").unwrap();
    let model = make(dir.path(), "zero", "hklut-s");
    let text = stdout(&hklut(&[
        "eval",
        "--model",
        s(&model),
        "--root",
        s(dir.path()),
        "--dataset",
        "Mini",
        "--report",
        s(&kv),
        "--energy-config",
        s(&energy),
    ]));
    assert!(text.contains("size 100.0 KB"));
    let lines = fs::read_to_string(&kv).unwrap();
    assert!(lines.lines().all(|l| l.split(' ').count() == 4));
    assert!(lines.contains("Mini mean float_ops 0"));
    assert!(lines.contains("Mini one psnr "));

    let nearest = stdout(&hklut(&["eval", "--method", "nearest", "--root", s(dir.path()), "--dataset", "Mini"]));
    let mean = |t: &str| t.lines().find(|l| l.trim_start().starts_with("mean")).unwrap().to_string();
    assert_eq!(mean(&text), mean(&nearest));

    fs::write(&energy, "bogus = 1.0\n").unwrap();
    let o = hklut(&[
        "eval",
        "--model",
        s(&model),
        "--root",
        s(dir.path()),
        "--dataset",
        "Mini",
        "--energy-config",
        s(&energy),
    ]);
    assert!(!o.status.success());
}
