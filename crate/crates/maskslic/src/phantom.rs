//! Deterministic synthetic datasets: a 2D blob image with an irregular mask
//! (optionally translated together with its content), a 3D labeled volume
//! with four subregions under Gaussian noise, and a 4D series with planted
//! time-curve archetypes. These stand in for clinical data in every
//! experiment and in the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cohort::TemporalSeries;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::VolumeData;
use crate::volume::{translate_mask, FeatureVolume, Mask};

/// What to generate. Parse from a CLI string with [`PhantomSpec::parse`].
#[derive(Debug, Clone, PartialEq)]
pub enum PhantomSpec {
    /// 2D image with smooth blobs and an irregular mask. `translate` shifts
    /// the mask and the image content together by an integer offset.
    BlobImage2d {
        dims: [usize; 2],
        translate: [i64; 2],
        /// Pixel noise as a fraction of the blob amplitude.
        noise: f64,
    },
    /// 3D volume with an ellipsoidal mask split into four labeled subregions
    /// (a nested core plus three angular sectors) at distinct intensities.
    LabeledVolume3d {
        dim: usize,
        /// Gaussian noise sigma as a fraction of the inter-region contrast.
        noise: f64,
        /// Mask semi-axis as a fraction of the half-extent.
        mask_frac: f64,
    },
    /// 4D series with `archetypes` planted time curves over an ellipsoidal
    /// mask.
    TemporalArchetypes {
        dim: usize,
        frames: usize,
        archetypes: usize,
        /// Gaussian noise sigma as a fraction of the archetype contrast (the
        /// smallest pairwise peak curve separation).
        noise: f64,
    },
}

impl PhantomSpec {
    /// Parses the short spec names used by the CLI: `a`, `b`, `c`.
    pub fn parse(name: &str) -> Result<PhantomSpec> {
        match name {
            "a" => Ok(PhantomSpec::BlobImage2d {
                dims: [128, 128],
                translate: [0, 0],
                noise: 0.05,
            }),
            "b" => Ok(PhantomSpec::LabeledVolume3d {
                dim: 48,
                noise: 0.2,
                mask_frac: 0.8,
            }),
            "c" => Ok(PhantomSpec::TemporalArchetypes {
                dim: 24,
                frames: 30,
                archetypes: 3,
                noise: 0.3,
            }),
            other => Err(Error::BadSpec(format!(
                "unknown spec {other:?} (expected a, b or c)"
            ))),
        }
    }
}

/// A generated dataset: the data, its mask and a per-voxel ground-truth
/// label grid (-1 outside the mask).
#[derive(Debug, Clone)]
pub struct Phantom {
    pub data: VolumeData,
    pub mask: Mask,
    pub truth: Vec<i32>,
    /// The contrast the noise fraction was relative to (spec-dependent).
    pub contrast: f64,
}

/// Generates a phantom; identical spec and seed always produce identical
/// output.
pub fn make_phantom(spec: &PhantomSpec, seed: u64) -> Result<Phantom> {
    match spec {
        PhantomSpec::BlobImage2d {
            dims,
            translate,
            noise,
        } => blob_image(*dims, *translate, *noise, seed),
        PhantomSpec::LabeledVolume3d {
            dim,
            noise,
            mask_frac,
        } => labeled_volume(*dim, *noise, *mask_frac, seed),
        PhantomSpec::TemporalArchetypes {
            dim,
            frames,
            archetypes,
            noise,
        } => temporal_archetypes(*dim, *frames, *archetypes, *noise, seed),
    }
}

fn blob_image(dims: [usize; 2], translate: [i64; 2], noise: f64, seed: u64) -> Result<Phantom> {
    if dims[0] < 32 || dims[1] < 32 {
        return Err(Error::BadSpec(
            "blob image needs dims of at least 32".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid::from_dims(&dims)?;

    // irregular base mask: radius modulated by two angular harmonics
    let center = [dims[0] as f64 / 3.0, dims[1] as f64 / 3.0];
    let radius = dims[0].min(dims[1]) as f64 / 5.0;
    let phase1: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let phase2: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let mut bits = vec![false; grid.len()];
    for i0 in 0..dims[0] {
        for i1 in 0..dims[1] {
            let dx = i0 as f64 - center[0];
            let dy = i1 as f64 - center[1];
            let theta = dy.atan2(dx);
            let rho = radius
                * (1.0 + 0.25 * (3.0 * theta + phase1).sin() + 0.15 * (5.0 * theta + phase2).sin());
            if (dx * dx + dy * dy).sqrt() < rho {
                bits[grid.index([i0, i1, 0])] = true;
            }
        }
    }
    let base_mask = Mask::new(&dims, bits)?;

    // base image: background gradient plus smooth blobs, deterministic noise
    let amplitude = 100.0;
    let n_blobs = 6;
    let blobs: Vec<([f64; 2], f64, f64)> = (0..n_blobs)
        .map(|_| {
            let c = [
                center[0] + rng.random_range(-radius..radius),
                center[1] + rng.random_range(-radius..radius),
            ];
            let sigma = rng.random_range(radius * 0.15..radius * 0.5);
            let amp = amplitude * rng.random_range(0.4..1.0);
            (c, sigma, amp)
        })
        .collect();
    let normal = Normal::new(0.0, (noise * amplitude).max(f64::MIN_POSITIVE)).unwrap();
    let mut base_img = vec![0.0f64; grid.len()];
    let mut base_truth = vec![-1i32; grid.len()];
    for i0 in 0..dims[0] {
        for i1 in 0..dims[1] {
            let idx = grid.index([i0, i1, 0]);
            let mut v = 0.2 * amplitude * (i0 as f64 + i1 as f64) / (dims[0] + dims[1]) as f64;
            let mut best = (f64::INFINITY, -1i32);
            for (b, (c, sigma, amp)) in blobs.iter().enumerate() {
                let d2 = (i0 as f64 - c[0]).powi(2) + (i1 as f64 - c[1]).powi(2);
                v += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                if d2 < best.0 {
                    best = (d2, b as i32);
                }
            }
            if noise > 0.0 {
                v += normal.sample(&mut rng);
            }
            base_img[idx] = v;
            if base_mask.get(idx) {
                base_truth[idx] = best.1;
            }
        }
    }

    // translate mask and content together; vacated pixels take the gradient floor
    let mask = translate_mask(&base_mask, &[translate[0], translate[1]])?;
    let mut img = vec![0.0f64; grid.len()];
    let mut truth = vec![-1i32; grid.len()];
    for i0 in 0..dims[0] {
        for i1 in 0..dims[1] {
            let idx = grid.index([i0, i1, 0]);
            let s0 = i0 as i64 - translate[0];
            let s1 = i1 as i64 - translate[1];
            if s0 >= 0 && s1 >= 0 && (s0 as usize) < dims[0] && (s1 as usize) < dims[1] {
                let src = grid.index([s0 as usize, s1 as usize, 0]);
                img[idx] = base_img[src];
                truth[idx] = if mask.get(idx) { base_truth[src] } else { -1 };
            }
        }
    }
    let volume = FeatureVolume::with_unit_spacing(&dims, 1, img)?;
    Ok(Phantom {
        data: VolumeData::Features(volume),
        mask,
        truth,
        contrast: amplitude,
    })
}

fn labeled_volume(dim: usize, noise: f64, mask_frac: f64, seed: u64) -> Result<Phantom> {
    if dim < 12 {
        return Err(Error::BadSpec(
            "labeled volume needs dim of at least 12".into(),
        ));
    }
    if !(0.05..=0.95).contains(&mask_frac) {
        return Err(Error::BadSpec("mask_frac must lie in [0.05, 0.95]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [dim, dim, dim];
    let grid = Grid::from_dims(&dims)?;
    let half = dim as f64 / 2.0;
    let center = [half - 0.5, half - 0.5, half - 0.5];
    let semi = [
        mask_frac * half,
        mask_frac * half * 0.85,
        mask_frac * half * 0.92,
    ];

    let contrast = 100.0;
    let normal = Normal::new(0.0, (noise * contrast).max(f64::MIN_POSITIVE)).unwrap();
    let mut bits = vec![false; grid.len()];
    let mut truth = vec![-1i32; grid.len()];
    let mut data = vec![0.0f64; grid.len()];
    for i0 in 0..dim {
        for i1 in 0..dim {
            for i2 in 0..dim {
                let idx = grid.index([i0, i1, i2]);
                let d = [
                    (i0 as f64 - center[0]) / semi[0],
                    (i1 as f64 - center[1]) / semi[1],
                    (i2 as f64 - center[2]) / semi[2],
                ];
                let rho2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
                let mut v = 0.0;
                if rho2 < 1.0 {
                    bits[idx] = true;
                    let label = if rho2 < 0.25 {
                        0 // nested core
                    } else {
                        // three angular sectors around the core
                        let theta = d[1].atan2(d[0]) + std::f64::consts::PI;
                        1 + ((theta / std::f64::consts::TAU * 3.0).floor() as i32).clamp(0, 2)
                    };
                    truth[idx] = label;
                    v = label as f64 * contrast;
                }
                if noise > 0.0 {
                    v += normal.sample(&mut rng);
                }
                data[idx] = v;
            }
        }
    }
    let mask = Mask::new(&dims, bits)?;
    let volume = FeatureVolume::with_unit_spacing(&dims, 1, data)?;
    Ok(Phantom {
        data: VolumeData::Features(volume),
        mask,
        truth,
        contrast,
    })
}

/// Uptake-washout curve with time-to-peak `tau`, peaking at `amp`.
fn perfusion_curve(amp: f64, tau: f64, frames: usize) -> Vec<f64> {
    (0..frames)
        .map(|f| {
            let t = f as f64;
            amp * (t / tau) * (1.0 - t / tau).exp()
        })
        .collect()
}

fn temporal_archetypes(
    dim: usize,
    frames: usize,
    archetypes: usize,
    noise: f64,
    seed: u64,
) -> Result<Phantom> {
    if dim < 8 || frames < 4 {
        return Err(Error::BadSpec(
            "series needs dim >= 8 and frames >= 4".into(),
        ));
    }
    if !(2..=8).contains(&archetypes) {
        return Err(Error::BadSpec("archetype count must lie in [2, 8]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [dim, dim, dim];
    let grid = Grid::from_dims(&dims)?;
    let half = dim as f64 / 2.0;
    let center = [half - 0.5, half - 0.5, half - 0.5];
    let semi = [0.8 * half, 0.7 * half, 0.75 * half];

    let curves: Vec<Vec<f64>> = (0..archetypes)
        .map(|a| {
            let amp = 80.0 + 40.0 * a as f64;
            let tau = frames as f64 * (0.15 + 0.25 * a as f64 / (archetypes - 1).max(1) as f64);
            perfusion_curve(amp, tau, frames)
        })
        .collect();
    // contrast: smallest pairwise peak separation of the curves
    let mut contrast = f64::INFINITY;
    for a in 0..archetypes {
        for b in (a + 1)..archetypes {
            let sep = curves[a]
                .iter()
                .zip(curves[b].iter())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0f64, f64::max);
            contrast = contrast.min(sep);
        }
    }
    let normal = Normal::new(0.0, (noise * contrast).max(f64::MIN_POSITIVE)).unwrap();

    let nv = grid.len();
    let mut bits = vec![false; nv];
    let mut truth = vec![-1i32; nv];
    for i0 in 0..dim {
        for i1 in 0..dim {
            for i2 in 0..dim {
                let idx = grid.index([i0, i1, i2]);
                let d = [
                    (i0 as f64 - center[0]) / semi[0],
                    (i1 as f64 - center[1]) / semi[1],
                    (i2 as f64 - center[2]) / semi[2],
                ];
                if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] < 1.0 {
                    bits[idx] = true;
                    let theta = d[1].atan2(d[0]) + std::f64::consts::PI;
                    let a = ((theta / std::f64::consts::TAU * archetypes as f64).floor() as i32)
                        .clamp(0, archetypes as i32 - 1);
                    truth[idx] = a;
                }
            }
        }
    }
    // frame-outer sample order matches the in-memory series layout
    let mut values = vec![0.0f64; nv * frames];
    for (idx, &t) in truth.iter().enumerate() {
        if t < 0 {
            continue;
        }
        for f in 0..frames {
            let mut v = curves[t as usize][f];
            if noise > 0.0 {
                v += normal.sample(&mut rng);
            }
            values[f * nv + idx] = v;
        }
    }
    let mask = Mask::new(&dims, bits)?;
    let spacing = [1.0, 1.0, 1.0];
    let series = TemporalSeries::new(&dims, frames, &spacing, values)?;
    Ok(Phantom {
        data: VolumeData::Temporal(series),
        mask,
        truth,
        contrast,
    })
}

/// Largest connected component of a random blob: a connected mask for
/// randomized tests. `fill` is the pre-component fill probability.
pub fn random_connected_mask(dims: &[usize], fill: f64, seed: u64) -> Result<Mask> {
    let grid = Grid::from_dims(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    loop {
        let bits: Vec<bool> = (0..len)
            .map(|_| rng.random_bool(fill.clamp(0.05, 0.95)))
            .collect();
        if !bits.iter().any(|b| *b) {
            continue;
        }
        // BFS from the first set bit; retry from the largest component
        let mut comp_of = vec![usize::MAX; len];
        let mut sizes = Vec::new();
        for start in 0..len {
            if !bits[start] || comp_of[start] != usize::MAX {
                continue;
            }
            let cid = sizes.len();
            comp_of[start] = cid;
            let mut queue = vec![start];
            let mut size = 0usize;
            while let Some(idx) = queue.pop() {
                size += 1;
                let c = grid.coords(idx);
                for k in 0..grid.ndim {
                    for dir in [-1i64, 1] {
                        let mut p = [c[0] as i64, c[1] as i64, c[2] as i64];
                        p[k] += dir;
                        if grid.contains(p) {
                            let j = grid.index([p[0] as usize, p[1] as usize, p[2] as usize]);
                            if bits[j] && comp_of[j] == usize::MAX {
                                comp_of[j] = cid;
                                queue.push(j);
                            }
                        }
                    }
                }
            }
            sizes.push(size);
        }
        let largest = sizes
            .iter()
            .enumerate()
            .max_by_key(|(i, s)| (**s, std::cmp::Reverse(*i)))
            .map(|(i, _)| i)
            .unwrap();
        let keep: Vec<bool> = comp_of.iter().map(|&c| c == largest).collect();
        return Mask::new(dims, keep);
    }
}
