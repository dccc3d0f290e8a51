//! Deterministic start-point selection.
//!
//! Each pixel carries the row-major code `c = W*x + y`. A [`KSpec`] is a set
//! of divisors; a pixel is kept as a walk starting point iff its code is not
//! divisible by any divisor in the set. The rule is deterministic and spreads
//! kept pixels homogeneously over the image, and the divisor set controls the
//! kept fraction: `{k}` keeps `1 - 1/k` of the pixels, composite sets follow
//! inclusion-exclusion (e.g. `{2,3}` keeps `1 - 1/2 - 1/3 + 1/6 = 1/3`).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::image::{write_pgm, GrayImage, PixelCoord};
use crate::{Error, Rational, Result};

/// Which pixel codes to exclude as walk starting points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSpec(Inner);

#[derive(Clone, Debug, PartialEq, Eq)]
enum Inner {
    /// Keep every pixel.
    All,
    /// Drop pixels whose code is divisible by any of these. Sorted, unique,
    /// every element >= 2.
    Divisors(Vec<u64>),
}

impl KSpec {
    pub fn all() -> Self {
        KSpec(Inner::All)
    }

    /// Builds a divisor set. Divisors are sorted and deduplicated; values
    /// below 2 are rejected (divisor 1 would exclude every pixel).
    pub fn divisors(divisors: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut ds: Vec<u64> = divisors.into_iter().collect();
        if ds.is_empty() {
            return Err(Error::Invalid("divisor set must be nonempty".into()));
        }
        if let Some(bad) = ds.iter().find(|&&d| d < 2) {
            return Err(Error::Invalid(format!(
                "divisor {bad} is invalid; divisors must be >= 2"
            )));
        }
        ds.sort_unstable();
        ds.dedup();
        Ok(KSpec(Inner::Divisors(ds)))
    }

    pub fn is_all(&self) -> bool {
        matches!(self.0, Inner::All)
    }

    pub fn divisor_set(&self) -> Option<&[u64]> {
        match &self.0 {
            Inner::All => None,
            Inner::Divisors(ds) => Some(ds),
        }
    }

    /// Whether a pixel with this code starts a walk.
    pub fn keeps(&self, code: usize) -> bool {
        match &self.0 {
            Inner::All => true,
            Inner::Divisors(ds) => ds.iter().all(|&d| !(code as u64).is_multiple_of(d)),
        }
    }
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Inner::All => write!(f, "all"),
            Inner::Divisors(ds) => {
                let parts: Vec<String> = ds.iter().map(|d| d.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

impl FromStr for KSpec {
    type Err = Error;

    /// Parses `all`, a single divisor (`5`), or a divisor list separated by
    /// commas or plus signs (`2,9` / `2+9`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(KSpec::all());
        }
        let parts: Result<Vec<u64>> = s
            .split([',', '+'])
            .map(|tok| {
                tok.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::Invalid(format!("bad k-spec component '{tok}' in '{s}'")))
            })
            .collect();
        KSpec::divisors(parts?)
    }
}

/// The start pixels a [`KSpec`] keeps on a given image, ascending by code.
#[derive(Clone, Debug)]
pub struct StartSelection {
    spec: KSpec,
    points: Vec<PixelCoord>,
    total: usize,
}

impl StartSelection {
    pub fn spec(&self) -> &KSpec {
        &self.spec
    }

    pub fn points(&self) -> &[PixelCoord] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pixel count of the image the selection was taken from.
    pub fn image_pixels(&self) -> usize {
        self.total
    }

    /// `|points| / (W*H)` as an exact ratio.
    pub fn kept_fraction(&self) -> Rational {
        Rational::new(self.points.len() as u64, self.total as u64)
    }
}

/// Applies the selection rule to every pixel of `image`.
pub fn select_starts(image: &GrayImage, spec: &KSpec) -> StartSelection {
    let total = image.pixel_count();
    let points: Vec<PixelCoord> = (0..total)
        .filter(|&code| spec.keeps(code))
        .map(|code| image.coord_of_code(code))
        .collect();
    debug_assert!(!points.is_empty(), "code 1 is never divisible by any k >= 2");
    StartSelection {
        spec: spec.clone(),
        points,
        total,
    }
}

/// Asymptotic kept fraction of a spec, by inclusion-exclusion over the
/// divisor set. Per-image counts differ from this by at most O(1/(W*H)).
pub fn fraction_for_spec(spec: &KSpec) -> Result<Rational> {
    let ds = match spec.divisor_set() {
        None => return Ok(Rational::new(1, 1)),
        Some(ds) => ds,
    };
    if ds.len() > 20 {
        return Err(Error::Invalid(format!(
            "{} divisors is too many for an exact fraction; keep the set small",
            ds.len()
        )));
    }
    // Count kept residues in one period L = lcm(divisors):
    // kept = sum over subsets S of (-1)^|S| * L / lcm(S).
    let mut period: u128 = 1;
    for &d in ds {
        period = lcm_u128(period, d as u128).ok_or_else(|| {
            Error::Invalid("divisor set period overflows; use smaller divisors".into())
        })?;
    }
    let mut kept: i128 = 0;
    for mask in 0u32..(1 << ds.len()) {
        let mut l: u128 = 1;
        for (i, &d) in ds.iter().enumerate() {
            if mask & (1 << i) != 0 {
                l = lcm_u128(l, d as u128).expect("subset lcm divides full period");
            }
        }
        let term = (period / l) as i128;
        if mask.count_ones() % 2 == 0 {
            kept += term;
        } else {
            kept -= term;
        }
    }
    debug_assert!(kept > 0 && kept as u128 <= period);
    Ok(Rational::new(kept as u64, period as u64).reduced())
}

fn lcm_u128(a: u128, b: u128) -> Option<u128> {
    let g = gcd_u128(a, b);
    (a / g).checked_mul(b)
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Writes the selection as a PGM mask: 255 where a pixel starts a walk,
/// 128 where it is ignored.
pub fn export_mask(image: &GrayImage, spec: &KSpec, path: &Path) -> Result<()> {
    let data: Vec<u8> = (0..image.pixel_count())
        .map(|code| if spec.keeps(code) { 255 } else { 128 })
        .collect();
    write_pgm(path, image.width(), image.height(), &data)
}
