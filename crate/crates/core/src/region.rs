//! Lattice sites and finite regions of `Z^ν`.
//!
//! Sites are ordered lexicographically on their integer coordinates. Every
//! Kronecker-product layout in the crate follows this order: the first site
//! of a region is the most significant tensor factor.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A site of the cubic lattice `Z^ν`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn shifted(&self, by: &[i64]) -> Site {
        Site(self.0.iter().zip(by).map(|(a, b)| a + b).collect())
    }

    pub fn offset_from(&self, other: &Site) -> Vec<i64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    /// ℓ∞ distance.
    pub fn distance(&self, other: &Site) -> i64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.len() == 1 {
            write!(f, "{}", self.0[0])
        } else {
            write!(f, "(")?;
            for (k, c) in self.0.iter().enumerate() {
                if k > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{c}")?;
            }
            write!(f, ")")
        }
    }
}

/// A finite set of sites of `Z^ν`, stored sorted and without repetition.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    dim: usize,
    sites: Vec<Site>,
}

impl Region {
    pub fn empty(dim: usize) -> Self {
        Region { dim, sites: Vec::new() }
    }

    pub fn from_sites(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        let set: BTreeSet<Site> = sites.into_iter().collect();
        if dim == 0 {
            return Err(Error::validation("lattice dimension must be at least 1"));
        }
        if let Some(bad) = set.iter().find(|s| s.dim() != dim) {
            return Err(Error::validation(format!(
                "site {bad:?} does not live in dimension {dim}"
            )));
        }
        Ok(Region { dim, sites: set.into_iter().collect() })
    }

    /// The 1D interval `[a, b]` (inclusive); empty when `b < a`.
    pub fn interval(a: i64, b: i64) -> Self {
        Region {
            dim: 1,
            sites: (a..=b).map(|x| Site(vec![x])).collect(),
        }
    }

    /// The box `[lo₁,hi₁] × … × [lo_ν,hi_ν]`.
    pub fn cuboid(lo: &[i64], hi: &[i64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::validation("box corners must share a positive dimension"));
        }
        let mut sites = vec![Vec::new()];
        for (&a, &b) in lo.iter().zip(hi) {
            let mut next = Vec::new();
            for prefix in &sites {
                for x in a..=b {
                    let mut s: Vec<i64> = prefix.clone();
                    s.push(x);
                    next.push(s);
                }
            }
            sites = next;
        }
        Region::from_sites(lo.len(), sites.into_iter().map(Site))
    }

    /// Box of side `side` in every direction, with corner at `-(side/2)`.
    pub fn centered_box(dim: usize, side: usize) -> Result<Self> {
        if side == 0 {
            return Ok(Region::empty(dim));
        }
        let lo = -((side / 2) as i64);
        let hi = lo + side as i64 - 1;
        Region::cuboid(&vec![lo; dim], &vec![hi; dim])
    }

    /// A van Hove sequence of centered boxes with the given sides.
    pub fn box_sequence(dim: usize, sides: &[usize]) -> Result<Vec<Region>> {
        sides.iter().map(|&s| Region::centered_box(dim, s)).collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn volume(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.sites.binary_search(site).is_ok()
    }

    pub fn position(&self, site: &Site) -> Option<usize> {
        self.sites.binary_search(site).ok()
    }

    pub fn is_subset_of(&self, other: &Region) -> bool {
        self.sites.iter().all(|s| other.contains(s))
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.sites.iter().any(|s| other.contains(s))
    }

    pub fn translate(&self, by: &[i64]) -> Region {
        Region {
            dim: self.dim,
            sites: self.sites.iter().map(|s| s.shifted(by)).collect(),
        }
    }

    pub fn union(&self, other: &Region) -> Region {
        let set: BTreeSet<Site> = self.sites.iter().chain(&other.sites).cloned().collect();
        Region { dim: self.dim, sites: set.into_iter().collect() }
    }

    pub fn difference(&self, other: &Region) -> Region {
        Region {
            dim: self.dim,
            sites: self.sites.iter().filter(|s| !other.contains(s)).cloned().collect(),
        }
    }

    /// All sites within ℓ∞ distance `width` of the region (the region included).
    pub fn collar(&self, width: usize) -> Region {
        if width == 0 {
            return self.clone();
        }
        let w = width as i64;
        let mut offsets = vec![Vec::new()];
        for _ in 0..self.dim {
            let mut next = Vec::new();
            for prefix in &offsets {
                for x in -w..=w {
                    let mut o: Vec<i64> = prefix.clone();
                    o.push(x);
                    next.push(o);
                }
            }
            offsets = next;
        }
        let set: BTreeSet<Site> = self
            .sites
            .iter()
            .flat_map(|s| offsets.iter().map(move |o| s.shifted(o)))
            .collect();
        Region { dim: self.dim, sites: set.into_iter().collect() }
    }

    /// ℓ∞ diameter: largest coordinate spread.
    pub fn diameter(&self) -> i64 {
        (0..self.dim)
            .map(|k| {
                let lo = self.sites.iter().map(|s| s.0[k]).min().unwrap_or(0);
                let hi = self.sites.iter().map(|s| s.0[k]).max().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0)
    }

    /// Lower and upper corners of the bounding box.
    pub fn bounds(&self) -> Option<(Vec<i64>, Vec<i64>)> {
        let first = self.sites.first()?;
        let mut lo = first.0.clone();
        let mut hi = first.0.clone();
        for s in &self.sites {
            for k in 0..self.dim {
                lo[k] = lo[k].min(s.0[k]);
                hi[k] = hi[k].max(s.0[k]);
            }
        }
        Some((lo, hi))
    }

    /// True for a 1D region without holes.
    pub fn is_interval(&self) -> bool {
        self.dim == 1
            && self
                .sites
                .windows(2)
                .all(|w| w[1].0[0] == w[0].0[0] + 1)
    }

    /// Hilbert-space dimension `site_dim^|Λ|`, saturating at `u128::MAX`.
    pub fn hilbert_dim(&self, site_dim: usize) -> u128 {
        let mut d: u128 = 1;
        for _ in 0..self.volume() {
            d = d.saturating_mul(site_dim as u128);
        }
        d
    }
}

impl fmt::Debug for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_interval() && !self.is_empty() {
            let a = self.sites[0].0[0];
            let b = self.sites[self.sites.len() - 1].0[0];
            return write!(f, "[{a},{b}]");
        }
        f.debug_set().entries(&self.sites).finish()
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
