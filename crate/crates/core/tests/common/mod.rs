//! Shared fixtures for integration tests: seeded synthetic textures and an
//! independent reference walker.

use dtwalk::image::{DatasetSample, GrayImage, LabeledDataset, PixelCoord};
use dtwalk::walk::Rule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded correlated-noise texture: white noise, separable box blur with
/// radii `(rx, ry)`, contrast stretch, then quantization to `levels` gray
/// values. Pure integer arithmetic, so identical everywhere.
pub fn correlated_texture(
    seed: u64,
    width: u32,
    height: u32,
    rx: u32,
    ry: u32,
    levels: u16,
) -> GrayImage {
    assert!(levels >= 2);
    let (w, h) = (width as usize, height as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<u32> = (0..w * h).map(|_| rng.random::<u8>() as u32).collect();

    if rx > 0 {
        let mut out = vec![0u32; w * h];
        let r = rx as isize;
        for x in 0..h {
            for y in 0..w {
                let lo = (y as isize - r).max(0) as usize;
                let hi = ((y as isize + r) as usize).min(w - 1);
                let sum: u32 = buf[x * w + lo..=x * w + hi].iter().sum();
                out[x * w + y] = sum / (hi - lo + 1) as u32;
            }
        }
        buf = out;
    }
    if ry > 0 {
        let mut out = vec![0u32; w * h];
        let r = ry as isize;
        for x in 0..h {
            let lo = (x as isize - r).max(0) as usize;
            let hi = ((x as isize + r) as usize).min(h - 1);
            for y in 0..w {
                let sum: u32 = (lo..=hi).map(|xx| buf[xx * w + y]).sum();
                out[x * w + y] = sum / (hi - lo + 1) as u32;
            }
        }
        buf = out;
    }

    let min = *buf.iter().min().unwrap();
    let max = *buf.iter().max().unwrap();
    let stretched: Vec<u32> = if max > min {
        buf.iter().map(|&v| (v - min) * 255 / (max - min)).collect()
    } else {
        buf
    };
    let levels = levels as u32;
    let data: Vec<u8> = stretched
        .iter()
        .map(|&v| {
            let bin = (v * levels / 256).min(levels - 1);
            (bin * 255 / (levels - 1)) as u8
        })
        .collect();
    GrayImage::new(width, height, data).unwrap()
}

/// Plain seeded noise, no correlation.
pub fn noise_texture(seed: u64, width: u32, height: u32) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<u8> = (0..width as usize * height as usize)
        .map(|_| rng.random::<u8>())
        .collect();
    GrayImage::new(width, height, data).unwrap()
}

/// Class parameters for the synthetic 10-class texture set: box-blur radii
/// and quantization levels, chosen so the classes are well separated by walk
/// features.
pub const TEXTURE_CLASSES: [(u32, u32, u16); 10] = [
    (0, 0, 256),
    (2, 2, 256),
    (5, 5, 256),
    (1, 1, 4),
    (3, 3, 4),
    (0, 0, 8),
    (2, 2, 8),
    (5, 5, 8),
    (1, 1, 32),
    (4, 4, 2),
];

/// Builds an in-memory labeled dataset of synthetic textures.
pub fn texture_dataset(samples_per_class: usize, width: u32, height: u32) -> LabeledDataset {
    let classes: Vec<String> = (0..TEXTURE_CLASSES.len())
        .map(|c| format!("tex{c:02}"))
        .collect();
    let mut samples = Vec::new();
    for (c, &(rx, ry, levels)) in TEXTURE_CLASSES.iter().enumerate() {
        for s in 0..samples_per_class {
            let seed = (c as u64) * 1000 + s as u64;
            samples.push(DatasetSample {
                class: c,
                id: format!("s{s:02}"),
                image: correlated_texture(seed, width, height, rx, ry, levels),
            });
        }
    }
    LabeledDataset { classes, samples }
}

/// Independent reference walker: linear scans, coordinate-pair memory, and a
/// quadratic search of the stored state sequence for the first repeat.
pub fn reference_walk(
    image: &GrayImage,
    start: (u32, u32),
    mu: usize,
    rule: Rule,
    cap: usize,
) -> (usize, usize) {
    type State = ((u32, u32), Vec<(u32, u32)>);
    let offsets: [(i64, i64); 9] = [
        (0, 0),
        (-1, 0),
        (-1, 1),
        (0, 1),
        (1, 1),
        (1, 0),
        (1, -1),
        (0, -1),
        (-1, -1),
    ];
    let h = image.height() as i64;
    let w = image.width() as i64;
    let intensity = |p: (u32, u32)| image.intensity(PixelCoord::new(p.0, p.1)) as i32;

    let mut states: Vec<State> = Vec::new();
    let mut current = start;
    let mut memory: Vec<(u32, u32)> = if mu >= 1 { vec![start] } else { Vec::new() };

    for step in 0..=cap {
        let state = (current, memory.clone());
        if let Some(first) = states.iter().position(|s| *s == state) {
            return (first, step - first);
        }
        if step == cap {
            return (cap, 0);
        }
        states.push(state);

        let mut best: Option<(i32, (u32, u32))> = None;
        for (dx, dy) in offsets {
            let nx = current.0 as i64 + dx;
            let ny = current.1 as i64 + dy;
            if nx < 0 || ny < 0 || nx >= h || ny >= w {
                continue;
            }
            let q = (nx as u32, ny as u32);
            if memory.contains(&q) {
                continue;
            }
            let weight = (intensity(current) - intensity(q)).abs();
            let better = match (&best, rule) {
                (None, _) => true,
                (Some((b, _)), Rule::Min) => weight < *b,
                (Some((b, _)), Rule::Max) => weight > *b,
            };
            if better {
                best = Some((weight, q));
            }
        }
        match best {
            None => return (step, 0),
            Some((_, q)) => {
                current = q;
                if mu >= 1 {
                    memory.insert(0, q);
                    memory.truncate(mu);
                }
            }
        }
    }
    (cap, 0)
}
