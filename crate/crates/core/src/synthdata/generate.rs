use std::f32::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::{standard_split, Dataset};
use crate::error::{Error, Result};
use crate::tensorcore::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TabularTask {
    /// Two interleaved spirals, 2 classes.
    TwoSpirals,
    /// Three concentric noisy rings, 3 classes.
    Rings,
}

impl std::str::FromStr for TabularTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_spirals" => Ok(TabularTask::TwoSpirals),
            "rings" => Ok(TabularTask::Rings),
            other => Err(Error::Config(format!("unknown tabular task {other:?}"))),
        }
    }
}

pub const IMAGE_SIDE: usize = 12;
pub const MAX_IMAGE_CLASSES: usize = 6;

/// 2-D points; labels cycle through the classes so counts are balanced exactly.
pub fn gen_tabular(seed: u64, n: usize, task: TabularTask) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::Config(format!("need at least 100 samples, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0f32, 1.0).unwrap();
    let k = match task {
        TabularTask::TwoSpirals => 2,
        TabularTask::Rings => 3,
    };
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % k;
        let (x, y) = match task {
            TabularTask::TwoSpirals => {
                let t: f32 = rng.gen_range(0.05..1.0);
                let angle = 3.0 * PI * t + c as f32 * PI;
                (t * angle.cos(), t * angle.sin())
            }
            TabularTask::Rings => {
                let r = (c as f32 + 0.6) / k as f32;
                let angle: f32 = rng.gen_range(0.0..2.0 * PI);
                (r * angle.cos(), r * angle.sin())
            }
        };
        let sigma = 0.03;
        data.push(x + sigma * noise.sample(&mut rng));
        data.push(y + sigma * noise.sample(&mut rng));
        labels.push(c);
    }
    let (train, validation, test) = standard_split(n, &mut rng);
    let name = match task {
        TabularTask::TwoSpirals => "two_spirals",
        TabularTask::Rings => "rings",
    };
    Ok(Dataset {
        name: name.into(),
        seed,
        num_classes: k,
        samples: Tensor::new(vec![n, 2], data)?,
        labels,
        train,
        validation,
        test,
    })
}

/// Noisy `1×12×12` images of procedural shapes, one shape family per class:
/// horizontal bar, vertical bar, diagonal stroke, filled square, plus sign, hollow square.
pub fn gen_images(seed: u64, n: usize, classes: usize) -> Result<Dataset> {
    if n < 100 {
        return Err(Error::Config(format!("need at least 100 samples, got {n}")));
    }
    if !(2..=MAX_IMAGE_CLASSES).contains(&classes) {
        return Err(Error::Config(format!("image classes must be in 2..={MAX_IMAGE_CLASSES}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let px = IMAGE_SIDE * IMAGE_SIDE;
    let mut data = vec![0.0f32; n * px];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        let img = &mut data[i * px..(i + 1) * px];
        draw_shape(img, c, &mut rng);
        for v in img.iter_mut() {
            *v = (*v + rng.gen_range(0.0..0.75)).clamp(0.0, 1.0);
        }
        labels.push(c);
    }
    let (train, validation, test) = standard_split(n, &mut rng);
    Ok(Dataset {
        name: format!("shapes{classes}"),
        seed,
        num_classes: classes,
        samples: Tensor::new(vec![n, 1, IMAGE_SIDE, IMAGE_SIDE], data)?,
        labels,
        train,
        validation,
        test,
    })
}

fn draw_shape<R: Rng>(img: &mut [f32], class: usize, rng: &mut R) {
    let s = IMAGE_SIDE;
    let ink: f32 = rng.gen_range(0.35..0.7);
    let mut put = |r: usize, c: usize| {
        if r < s && c < s {
            img[r * s + c] = ink;
        }
    };
    match class {
        0 | 1 => {
            let line = rng.gen_range(1..s - 2);
            let start = rng.gen_range(0..4);
            let len = rng.gen_range(6..=s - start);
            let thick = rng.gen_range(1..=2);
            for t in 0..thick {
                for k in start..start + len {
                    if class == 0 {
                        put(line + t, k);
                    } else {
                        put(k, line + t);
                    }
                }
            }
        }
        2 => {
            let off: isize = rng.gen_range(-3..=3);
            let anti = rng.gen_bool(0.5);
            for r in 0..s as isize {
                let c = if anti { s as isize - 1 - r + off } else { r + off };
                if (0..s as isize).contains(&c) {
                    put(r as usize, c as usize);
                }
            }
        }
        3 | 5 => {
            let side = rng.gen_range(4..=6);
            let r0 = rng.gen_range(0..=s - side);
            let c0 = rng.gen_range(0..=s - side);
            for r in r0..r0 + side {
                for c in c0..c0 + side {
                    let edge = r == r0 || c == c0 || r == r0 + side - 1 || c == c0 + side - 1;
                    if class == 3 || edge {
                        put(r, c);
                    }
                }
            }
        }
        _ => {
            let arm = rng.gen_range(2..=3);
            let cr = rng.gen_range(arm..s - arm);
            let cc = rng.gen_range(arm..s - arm);
            for d in 0..=2 * arm {
                put(cr - arm + d, cc);
                put(cr, cc - arm + d);
            }
        }
    }
}
