//! Self-checks run by `hklut verify`.

use std::fmt;

use rand::Rng;

use hklut::model::{ModelLayout, ModelSpec, ResidualMode};
use hklut::{classical_upscale, model_forward, reference_forward, ImagePlane};

/// First differing output pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub y: usize,
    pub x: usize,
    pub expected: u8,
    pub actual: u8,
}

fn first_mismatch(expected: &ImagePlane, actual: &ImagePlane) -> Option<Mismatch> {
    assert_eq!(expected.dims(), actual.dims(), "compared outputs differ in shape");
    let w = expected.width();
    expected.pixels().iter().zip(actual.pixels()).position(|(a, b)| a != b).map(|i| Mismatch {
        y: i / w,
        x: i % w,
        expected: expected.pixels()[i],
        actual: actual.pixels()[i],
    })
}

/// A failing input shrunk to the smallest crop that still fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub check: &'static str,
    pub image: ImagePlane,
    pub mismatch: Mismatch,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, w) = self.image.dims();
        let m = &self.mismatch;
        writeln!(f, "  minimal failing {} case: {h}x{w} input", self.check)?;
        for y in 0..h {
            let row: Vec<String> = self.image.row(y).iter().map(|p| format!("{p:3}")).collect();
            writeln!(f, "    {}", row.join(" "))?;
        }
        writeln!(f, "  output ({}, {}): expected {}, got {}", m.y, m.x, m.expected, m.actual)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: usize,
    pub total: usize,
    pub failure: Option<Failure>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failure.is_none())
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.failure.is_some() { "FAIL" } else { "ok" };
            write!(f, "  {:<12} {status:<4} {}/{}", c.name, c.passed, c.total)?;
            match &c.note {
                Some(note) => writeln!(f, " ({note})")?,
                None => writeln!(f)?,
            }
            if let Some(failure) = &c.failure {
                write!(f, "{failure}")?;
            }
        }
        Ok(())
    }
}

/// The float reference is exact when every interpolation weight is dyadic.
pub fn oracle_is_exact(model: &ModelSpec) -> bool {
    model.stages().iter().all(|s| s.residual() == ResidualMode::Nearest || s.upscale().is_power_of_two())
}

/// Searches crops of `img` by increasing area for one on which `check` fails.
fn minimize(img: &ImagePlane, check: &dyn Fn(&ImagePlane) -> Option<Mismatch>) -> (ImagePlane, Mismatch) {
    let (h, w) = img.dims();
    let mut sizes: Vec<(usize, usize)> = (1..=h).flat_map(|ch| (1..=w).map(move |cw| (ch, cw))).collect();
    sizes.sort_by_key(|&(ch, cw)| (ch * cw, ch));
    for (ch, cw) in sizes {
        for top in 0..=h - ch {
            for left in 0..=w - cw {
                let crop = img.crop(top, left, ch, cw);
                if let Some(m) = check(&crop) {
                    return (crop, m);
                }
            }
        }
    }
    unreachable!("the full image fails by assumption")
}

fn run_check(
    name: &'static str,
    images: &[ImagePlane],
    check: &dyn Fn(&ImagePlane) -> Option<Mismatch>,
) -> CheckResult {
    let mut passed = 0;
    let mut failure = None;
    for img in images {
        if check(img).is_none() {
            passed += 1;
        } else if failure.is_none() {
            let (image, mismatch) = minimize(img, check);
            failure = Some(Failure { check: name, image, mismatch });
        }
    }
    CheckResult { name, passed, total: images.len(), failure, note: None }
}

/// Engine output for the all-zero tables: the residual upsampling chain alone.
pub fn residual_chain(img: &ImagePlane, model: &ModelSpec) -> ImagePlane {
    model.stages().iter().fold(img.clone(), |x, s| classical_upscale(&x, s.upscale(), s.residual().into()))
}

/// Oracle agreement, rotation equivariance and zero-table neutrality on `images`.
pub fn verify_model(model: &ModelSpec, images: &[ImagePlane]) -> VerifyReport {
    let mut checks = Vec::new();

    if oracle_is_exact(model) {
        checks.push(run_check("oracle", images, &|img| {
            first_mismatch(&reference_forward(img, model), &model_forward(img, model))
        }));
    } else {
        checks.push(CheckResult {
            name: "oracle",
            passed: 0,
            total: 0,
            failure: None,
            note: Some("skipped: interpolated residual with a non-power-of-two upscale".into()),
        });
    }

    checks.push(run_check("equivariance", images, &|img| {
        (1..4).find_map(|j| first_mismatch(&model_forward(img, model).rotate(j), &model_forward(&img.rotate(j), model)))
    }));

    let zero = model.zeroed();
    checks.push(run_check("zero-table", images, &|img| {
        first_mismatch(&residual_chain(img, &zero), &model_forward(img, &zero))
    }));

    VerifyReport { checks }
}

/// Layout for the `i`-th random model: a rotation through the shipped
/// shapes and residual modes, all with power-of-two upscales.
pub fn random_layout(i: usize) -> (String, ModelLayout) {
    let shapes: [(&str, &[usize]); 6] =
        [("hklut-s", &[2, 2]), ("hklut-l", &[2, 1, 2]), ("x4", &[4]), ("x2", &[2]), ("1x2", &[1, 2]), ("x1", &[1])];
    let modes = [ResidualMode::Nearest, ResidualMode::Bilinear, ResidualMode::Bicubic];
    let (name, upscales) = shapes[i % shapes.len()];
    let mode = modes[(i / shapes.len() + i) % modes.len()];
    (format!("{name}, {mode}"), ModelLayout::progressive(upscales).with_residual(mode))
}

/// `count` random planes, including 1×1 and non-square shapes.
pub fn test_images<R: Rng>(rng: &mut R, count: usize) -> Vec<ImagePlane> {
    const SIZES: [(usize, usize); 8] = [(1, 1), (1, 6), (5, 1), (4, 7), (9, 5), (8, 8), (3, 11), (12, 10)];
    (0..count)
        .map(|i| {
            let (h, w) = SIZES[i % SIZES.len()];
            ImagePlane::from_fn(h, w, |_, _| rng.gen())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn random_models_pass() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for i in 0..6 {
            let model = random_layout(i).1.random(&mut rng).unwrap();
            let report = verify_model(&model, &test_images(&mut rng, 4));
            assert!(report.passed(), "{report}");
        }
    }

    #[test]
    fn broken_engine_is_minimized() {
        let img = ImagePlane::from_fn(6, 6, |y, x| (y * 6 + x) as u8);
        // Fails whenever the input contains the value 20.
        let check =
            |p: &ImagePlane| p.pixels().contains(&20).then_some(Mismatch { y: 0, x: 0, expected: 1, actual: 2 });
        let (crop, _) = minimize(&img, &check);
        assert_eq!(crop.dims(), (1, 1));
        assert_eq!(crop.get(0, 0), 20);
    }

    #[test]
    fn oracle_exactness_rule() {
        assert!(oracle_is_exact(&ModelLayout::progressive(&[3]).zeros().unwrap()));
        let bic3 = ModelLayout::progressive(&[3]).with_residual(ResidualMode::Bicubic);
        assert!(!oracle_is_exact(&bic3.zeros().unwrap()));
        assert!(oracle_is_exact(&ModelLayout::hklut_l().with_residual(ResidualMode::Bicubic).zeros().unwrap()));
    }
}
