use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg::{sym_eig, Matrix, SpdFactor, Vector};

pub const CHANG_DIM: usize = 15;

const CHANG_BLOCK: usize = 8;
const CHANG_WITHIN_BLOCK_CORR: f64 = 0.9;
const CHANG_CROSS_BLOCK_CORR: f64 = 0.1;
/// Within-class variance left along the discriminating contrast.
const CHANG_CONTRAST_VAR: f64 = 0.005;
/// Class separation along the contrast, in within-class standard deviations.
const CHANG_CONTRAST_SEP: f64 = 6.0;
/// Class offset along the leading block eigenvector; makes the two leading PCs
/// look informative without separating the classes.
const CHANG_LEAD_SHIFT: f64 = 4.25;

/// Two 15-dimensional Gaussian classes of `n / 2` points each.
///
/// Within-class covariance has unit variances, correlation 0.9 inside variables 0..8 and
/// 8..15 and 0.1 across blocks, except that the contrast `(e0 - e1) / sqrt(2)` is squeezed
/// to a small variance. The classes differ mostly along that contrast, which ends up as
/// the last principal component of the pooled data.
pub fn gen_chang(n: usize, seed: u64) -> Result<LabeledDataset> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Chang data needs an even n >= 4, got {n}"
        )));
    }
    let d = CHANG_DIM;
    let block = Matrix::from_fn(d, d, |i, j| {
        if i == j {
            1.0
        } else if (i < CHANG_BLOCK) == (j < CHANG_BLOCK) {
            CHANG_WITHIN_BLOCK_CORR
        } else {
            CHANG_CROSS_BLOCK_CORR
        }
    });
    let mut contrast = Vector::zeros(d);
    contrast[0] = 1.0;
    contrast[1] = -1.0;
    contrast /= contrast.norm();
    // The contrast is an eigenvector of the block matrix with eigenvalue 1 - 0.9.
    let shrink = (1.0 - CHANG_WITHIN_BLOCK_CORR) - CHANG_CONTRAST_VAR;
    let cov = &block - shrink * &contrast * contrast.transpose();
    let lead = sym_eig(&block)?.vectors.column(0).into_owned();
    let shift =
        CHANG_CONTRAST_SEP * CHANG_CONTRAST_VAR.sqrt() * &contrast + CHANG_LEAD_SHIFT * lead;
    let l = SpdFactor::new(&cov)?.l();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let mut x = Matrix::zeros(n, d);
    let mut labels = vec![0usize; n];
    for (i, label) in labels.iter_mut().enumerate() {
        let class = usize::from(i >= half);
        let z = Vector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sign = if class == 0 { -0.5 } else { 0.5 };
        let row = &l * z + sign * &shift;
        x.row_mut(i).copy_from(&row.transpose());
        *label = class;
    }
    LabeledDataset::new(x, Some(labels), "chang")
}

/// Three-dimensional benchmark topologies modelled on the FCPS suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FcpsShape {
    Atom,
    Chainlink,
    Hepta,
    Lsun3d,
    Tetra,
}

impl FcpsShape {
    pub const ALL: [FcpsShape; 5] = [
        FcpsShape::Atom,
        FcpsShape::Chainlink,
        FcpsShape::Hepta,
        FcpsShape::Lsun3d,
        FcpsShape::Tetra,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FcpsShape::Atom => "atom",
            FcpsShape::Chainlink => "chainlink",
            FcpsShape::Hepta => "hepta",
            FcpsShape::Lsun3d => "lsun3d",
            FcpsShape::Tetra => "tetra",
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            FcpsShape::Atom | FcpsShape::Chainlink => 2,
            FcpsShape::Hepta => 7,
            FcpsShape::Lsun3d | FcpsShape::Tetra => 4,
        }
    }

    /// Sample size of the published data set.
    pub fn reference_size(self) -> usize {
        match self {
            FcpsShape::Atom => 800,
            FcpsShape::Chainlink => 1000,
            FcpsShape::Hepta => 212,
            FcpsShape::Lsun3d => 404,
            FcpsShape::Tetra => 400,
        }
    }
}

impl fmt::Display for FcpsShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FcpsShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FcpsShape::ALL
            .into_iter()
            .find(|shape| shape.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown shape '{s}' (expected atom, chainlink, hepta, lsun3d or tetra)"
                ))
            })
    }
}

const CHAINLINK_TUBE: f64 = 0.1;

pub fn gen_fcps(shape: FcpsShape, n: usize, seed: u64) -> Result<LabeledDataset> {
    let g = shape.class_count();
    if n < 10 * g {
        return Err(Error::invalid(format!(
            "{shape} needs at least {} points, got {n}",
            10 * g
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<[f64; 3]> = Vec::with_capacity(n);
    let mut labels: Vec<usize> = Vec::with_capacity(n);
    let mut push = |rows: &mut Vec<[f64; 3]>, p: [f64; 3], class: usize| {
        rows.push(p);
        labels.push(class);
    };

    match shape {
        FcpsShape::Atom => {
            let core = n / 2;
            for _ in 0..core {
                let p = gaussian3(&mut rng, [0.0; 3], 0.15);
                push(&mut rows, p, 0);
            }
            for _ in core..n {
                let r = 1.0 + 0.05 * normal(&mut rng);
                let u = unit_sphere(&mut rng);
                push(&mut rows, [r * u[0], r * u[1], r * u[2]], 1);
            }
        }
        FcpsShape::Chainlink => {
            let half = n / 2;
            for i in 0..n {
                let t = rng.random::<f64>() * TAU;
                let (center, class) = if i < half {
                    ([t.cos(), t.sin(), 0.0], 0)
                } else {
                    ([1.0 + t.cos(), 0.0, t.sin()], 1)
                };
                let p = gaussian3(&mut rng, center, CHAINLINK_TUBE);
                push(&mut rows, p, class);
            }
        }
        FcpsShape::Hepta => {
            let centers = [
                [0.0, 0.0, 0.0],
                [3.0, 0.0, 0.0],
                [-3.0, 0.0, 0.0],
                [0.0, 3.0, 0.0],
                [0.0, -3.0, 0.0],
                [0.0, 0.0, 3.0],
                [0.0, 0.0, -3.0],
            ];
            for (class, size) in split_sizes(n, 7).into_iter().enumerate() {
                for _ in 0..size {
                    let p = gaussian3(&mut rng, centers[class], 0.4);
                    push(&mut rows, p, class);
                }
            }
        }
        FcpsShape::Tetra => {
            let centers = [
                [1.0, 1.0, 1.0],
                [1.0, -1.0, -1.0],
                [-1.0, 1.0, -1.0],
                [-1.0, -1.0, 1.0],
            ];
            for (class, size) in split_sizes(n, 4).into_iter().enumerate() {
                for _ in 0..size {
                    let p = gaussian3(&mut rng, centers[class], 0.45);
                    push(&mut rows, p, class);
                }
            }
        }
        FcpsShape::Lsun3d => {
            let a = n / 4;
            let b = n / 4;
            let c = 3 * n / 8;
            let sizes = [a, b, c, n - a - b - c];
            for _ in 0..sizes[0] {
                let p = uniform_box(&mut rng, [0.0, 4.0], [0.0, 1.0], [0.0, 1.0]);
                push(&mut rows, p, 0);
            }
            for _ in 0..sizes[1] {
                let p = uniform_box(&mut rng, [0.0, 1.0], [1.5, 5.0], [0.0, 1.0]);
                push(&mut rows, p, 1);
            }
            for _ in 0..sizes[2] {
                let p = gaussian3(&mut rng, [3.5, 3.5, 0.5], 0.4);
                push(&mut rows, p, 2);
            }
            for _ in 0..sizes[3] {
                let p = gaussian3(&mut rng, [1.5, 2.5, 3.5], 0.3);
                push(&mut rows, p, 3);
            }
        }
    }

    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let x = Matrix::from_row_slice(n, 3, &flat);
    LabeledDataset::new(x, Some(labels), shape.name())
}

/// First class absorbs the remainder.
fn split_sizes(n: usize, g: usize) -> Vec<usize> {
    let base = n / g;
    let mut sizes = vec![base; g];
    sizes[0] += n - base * g;
    sizes
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian3(rng: &mut ChaCha8Rng, center: [f64; 3], sd: f64) -> [f64; 3] {
    [
        center[0] + sd * normal(rng),
        center[1] + sd * normal(rng),
        center[2] + sd * normal(rng),
    ]
}

fn unit_sphere(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [normal(rng), normal(rng), normal(rng)];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm > 1e-12 {
            return [v[0] / norm, v[1] / norm, v[2] / norm];
        }
    }
}

fn uniform_box(rng: &mut ChaCha8Rng, xr: [f64; 2], yr: [f64; 2], zr: [f64; 2]) -> [f64; 3] {
    [
        rng.random_range(xr[0]..xr[1]),
        rng.random_range(yr[0]..yr[1]),
        rng.random_range(zr[0]..zr[1]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(labels: &[usize], g: usize) -> Vec<usize> {
        let mut c = vec![0; g];
        for &l in labels {
            c[l] += 1;
        }
        c
    }

    fn centroids(ds: &LabeledDataset, g: usize) -> Vec<Vector> {
        let labels = ds.labels.as_ref().unwrap();
        let mut sums = vec![Vector::zeros(ds.d()); g];
        let c = counts(labels, g);
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += ds.x.row(i).transpose();
        }
        sums.into_iter().zip(c).map(|(s, k)| s / k as f64).collect()
    }

    #[test]
    fn chang_shape_and_balance() {
        let ds = gen_chang(1000, 1).unwrap();
        assert_eq!(ds.x.shape(), (1000, 15));
        assert_eq!(counts(ds.labels.as_ref().unwrap(), 2), vec![500, 500]);
        let tiny = gen_chang(4, 9).unwrap();
        assert_eq!(tiny.x.shape(), (4, 15));
        assert_eq!(counts(tiny.labels.as_ref().unwrap(), 2), vec![2, 2]);
    }

    #[test]
    fn chang_rejects_odd_or_tiny_n() {
        assert!(gen_chang(5, 0).is_err());
        assert!(gen_chang(2, 0).is_err());
    }

    #[test]
    fn fcps_reference_sizes_have_table_class_counts() {
        for shape in FcpsShape::ALL {
            let ds = gen_fcps(shape, shape.reference_size(), 3).unwrap();
            assert_eq!(ds.x.shape(), (shape.reference_size(), 3));
            let c = counts(ds.labels.as_ref().unwrap(), shape.class_count());
            assert!(c.iter().all(|&k| k > 0), "{shape}: {c:?}");
            assert_eq!(ds.class_count(), Some(shape.class_count()));
        }
    }

    #[test]
    fn fcps_minimum_size_enforced() {
        assert!(gen_fcps(FcpsShape::Hepta, 69, 0).is_err());
        assert!(gen_fcps(FcpsShape::Hepta, 70, 0).is_ok());
    }

    #[test]
    fn shape_names_parse() {
        assert_eq!("Tetra".parse::<FcpsShape>().unwrap(), FcpsShape::Tetra);
        assert!(matches!(
            "torus".parse::<FcpsShape>(),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tetra_centroids_are_equidistant() {
        let ds = gen_fcps(FcpsShape::Tetra, 400, 11).unwrap();
        let c = centroids(&ds, 4);
        let mut dists = Vec::new();
        for a in 0..4 {
            for b in a + 1..4 {
                dists.push((&c[a] - &c[b]).norm());
            }
        }
        let lo = dists.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = dists.iter().copied().fold(0.0, f64::max);
        assert!(hi <= 1.1 * lo, "{dists:?}");
    }

    #[test]
    fn blob_shapes_are_nearest_centroid_separable() {
        for (shape, n) in [(FcpsShape::Hepta, 212), (FcpsShape::Tetra, 400)] {
            let ds = gen_fcps(shape, n, 5).unwrap();
            let g = shape.class_count();
            let c = centroids(&ds, g);
            let labels = ds.labels.as_ref().unwrap();
            let hits = (0..ds.n())
                .filter(|&i| {
                    let row = ds.x.row(i).transpose();
                    let best = (0..g)
                        .min_by(|&a, &b| (&row - &c[a]).norm().total_cmp(&(&row - &c[b]).norm()))
                        .unwrap();
                    best == labels[i]
                })
                .count();
            assert!(hits as f64 / ds.n() as f64 >= 0.9, "{shape}: {hits}");
        }
    }

    #[test]
    fn generators_are_seed_deterministic() {
        assert_eq!(gen_chang(100, 7).unwrap(), gen_chang(100, 7).unwrap());
        assert_ne!(gen_chang(100, 7).unwrap().x, gen_chang(100, 8).unwrap().x);
        for shape in FcpsShape::ALL {
            let a = gen_fcps(shape, 200, 4).unwrap();
            assert_eq!(a, gen_fcps(shape, 200, 4).unwrap());
            assert_ne!(a.x, gen_fcps(shape, 200, 5).unwrap().x);
        }
    }
}
