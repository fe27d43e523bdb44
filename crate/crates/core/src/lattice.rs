//! Site geometry for `Z^d` and the periodic box `[-n, n]^d`.
//!
//! Torus coordinates live in `[-n, n]` rather than `[0, 2n]`, so a site on
//! the torus has the same label as the corresponding site of `Z^d`. Sites
//! are indexed lexicographically (first axis most significant) with every
//! coordinate shifted by `n`.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest supported lattice dimension.
pub const MAX_DIM: usize = 4;

/// A lattice point with up to [`MAX_DIM`] integer coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site {
    coords: [i32; MAX_DIM],
    dim: u8,
}

impl Site {
    /// # Panics
    /// If `coords` is empty or longer than [`MAX_DIM`].
    pub fn new(coords: &[i32]) -> Self {
        assert!(
            !coords.is_empty() && coords.len() <= MAX_DIM,
            "site dimension must be in 1..={MAX_DIM}"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site {
            coords: c,
            dim: coords.len() as u8,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Site::new(&vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    /// Coordinate-wise `self + sign * e_axis`, without any wrapping.
    pub fn shifted(&self, axis: usize, step: i32) -> Site {
        let mut s = *self;
        s.coords[axis] += step;
        s
    }

    pub fn negated(&self) -> Site {
        let mut s = *self;
        for c in &mut s.coords[..self.dim as usize] {
            *c = -*c;
        }
        s
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Serialize for Site {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i32>::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "site must have 1..={MAX_DIM} coordinates"
            )));
        }
        Ok(Site::new(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    InfiniteZd,
    Torus { half_width: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    geometry: Geometry,
}

impl Lattice {
    pub fn infinite(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Lattice {
            dim,
            geometry: Geometry::InfiniteZd,
        })
    }

    /// The torus `[-n, n]^d` with periodic arithmetic mod `2n + 1`.
    pub fn torus(dim: usize, half_width: u32) -> Result<Self> {
        check_dim(dim)?;
        if half_width < 1 {
            return Err(Error::InvalidLattice("torus half-width must be >= 1".into()));
        }
        let side = 2 * half_width as u64 + 1;
        if side.checked_pow(dim as u32).is_none_or(|s| s > u32::MAX as u64) {
            return Err(Error::InvalidLattice("torus is too large".into()));
        }
        Ok(Lattice {
            dim,
            geometry: Geometry::Torus { half_width },
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.geometry {
            Geometry::InfiniteZd => Lattice::infinite(self.dim).map(|_| ()),
            Geometry::Torus { half_width } => Lattice::torus(self.dim, half_width).map(|_| ()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.geometry, Geometry::Torus { .. })
    }

    pub fn half_width(&self) -> Option<u32> {
        match self.geometry {
            Geometry::Torus { half_width } => Some(half_width),
            Geometry::InfiniteZd => None,
        }
    }

    /// Side length `2n + 1` of the torus.
    pub fn side(&self) -> Option<usize> {
        self.half_width().map(|n| 2 * n as usize + 1)
    }

    /// `|Λ_n| = (2n + 1)^d` for a torus, `None` on `Z^d`.
    pub fn size(&self) -> Option<usize> {
        self.side().map(|l| l.pow(self.dim as u32))
    }

    pub fn contains(&self, x: &Site) -> bool {
        if x.dim() != self.dim {
            return false;
        }
        match self.geometry {
            Geometry::InfiniteZd => true,
            Geometry::Torus { half_width } => {
                let n = half_width as i32;
                x.coords().iter().all(|&c| (-n..=n).contains(&c))
            }
        }
    }

    fn check_site(&self, x: &Site) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::misuse(format!("site {x:?} is not in {self:?}")))
        }
    }

    /// Reduce arbitrary coordinates into `[-n, n]^d`.
    pub fn wrap(&self, coords: &[i64]) -> Result<Site> {
        let Geometry::Torus { half_width } = self.geometry else {
            return Err(Error::misuse("wrap is only defined on a torus"));
        };
        if coords.len() != self.dim {
            return Err(Error::misuse(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let n = half_width as i64;
        let side = 2 * n + 1;
        let wrapped: Vec<i32> = coords.iter().map(|&c| ((c + n).rem_euclid(side) - n) as i32).collect();
        Ok(Site::new(&wrapped))
    }

    /// The neighbor of `x` in direction `dir`, where directions are ordered
    /// `+e_1, -e_1, +e_2, -e_2, ...`.
    pub fn neighbor(&self, x: &Site, dir: usize) -> Site {
        let axis = dir / 2;
        let step = if dir.is_multiple_of(2) { 1 } else { -1 };
        let mut y = x.shifted(axis, step);
        if let Geometry::Torus { half_width } = self.geometry {
            let n = half_width as i32;
            let c = &mut y.coords[axis];
            if *c > n {
                *c = -n;
            } else if *c < -n {
                *c = n;
            }
        }
        y
    }

    /// The `2d` nearest neighbors of `x` in the fixed direction order.
    pub fn neighbors(&self, x: &Site) -> Result<Vec<Site>> {
        self.check_site(x)?;
        Ok((0..2 * self.dim).map(|dir| self.neighbor(x, dir)).collect())
    }

    pub fn site_index(&self, x: &Site) -> Result<usize> {
        let Geometry::Torus { half_width } = self.geometry else {
            return Err(Error::misuse("site_index is only defined on a torus"));
        };
        self.check_site(x)?;
        let n = half_width as i64;
        let side = 2 * n + 1;
        Ok(x.coords().iter().fold(0i64, |acc, &c| acc * side + (c as i64 + n)) as usize)
    }

    pub fn site_at(&self, index: usize) -> Result<Site> {
        let (Some(size), Some(n)) = (self.size(), self.half_width()) else {
            return Err(Error::misuse("site_at is only defined on a torus"));
        };
        if index >= size {
            return Err(Error::misuse(format!("index {index} out of range 0..{size}")));
        }
        let side = 2 * n as usize + 1;
        let mut rest = index;
        let mut coords = vec![0i32; self.dim];
        for c in coords.iter_mut().rev() {
            *c = (rest % side) as i32 - n as i32;
            rest /= side;
        }
        Ok(Site::new(&coords))
    }

    /// All torus sites in index order. Empty on `Z^d`.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.size().unwrap_or(0)).map(move |i| self.site_at(i).expect("index in range"))
    }

    /// `x - y`, reduced onto the torus when the geometry is periodic.
    pub fn difference(&self, x: &Site, y: &Site) -> Site {
        let diff: Vec<i64> = x
            .coords()
            .iter()
            .zip(y.coords())
            .map(|(&a, &b)| a as i64 - b as i64)
            .collect();
        match self.geometry {
            Geometry::Torus { .. } => self.wrap(&diff).expect("torus"),
            Geometry::InfiniteZd => Site::new(&diff.iter().map(|&c| c as i32).collect::<Vec<_>>()),
        }
    }

    /// Row-major neighbor table over site indices, `2d` entries per site.
    pub fn neighbor_table(&self) -> Result<Vec<usize>> {
        let size = self
            .size()
            .ok_or_else(|| Error::misuse("neighbor table requires a torus"))?;
        let mut table = Vec::with_capacity(size * 2 * self.dim);
        for i in 0..size {
            let x = self.site_at(i)?;
            for dir in 0..2 * self.dim {
                table.push(self.site_index(&self.neighbor(&x, dir))?);
            }
        }
        Ok(table)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidLattice(format!(
            "dimension must be in 1..={MAX_DIM}, got {dim}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(c: &[i32]) -> Site {
        Site::new(c)
    }

    #[test]
    fn neighbors_on_line() {
        let z = Lattice::infinite(1).unwrap();
        assert_eq!(z.neighbors(&s(&[5])).unwrap(), vec![s(&[6]), s(&[4])]);
    }

    #[test]
    fn neighbors_wrap_on_small_torus() {
        let t = Lattice::torus(1, 1).unwrap();
        assert_eq!(t.neighbors(&s(&[1])).unwrap(), vec![s(&[-1]), s(&[0])]);

        let t2 = Lattice::torus(2, 2).unwrap();
        assert_eq!(
            t2.neighbors(&s(&[2, 0])).unwrap(),
            vec![s(&[-2, 0]), s(&[1, 0]), s(&[2, 1]), s(&[2, -1])]
        );
    }

    #[test]
    fn neighbors_reject_foreign_site() {
        let t = Lattice::torus(1, 1).unwrap();
        assert!(t.neighbors(&s(&[2])).is_err());
        assert!(t.neighbors(&s(&[0, 0])).is_err());
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(Lattice::torus(1, 1).unwrap().wrap(&[2]).unwrap(), s(&[-1]));
        assert_eq!(Lattice::torus(2, 2).unwrap().wrap(&[-3, 5]).unwrap(), s(&[2, 0]));
        assert_eq!(Lattice::torus(3, 3).unwrap().wrap(&[0, 0, 0]).unwrap(), s(&[0, 0, 0]));
        assert!(matches!(
            Lattice::infinite(2).unwrap().wrap(&[1, 1]),
            Err(Error::Misuse(_))
        ));
    }

    #[test]
    fn site_index_examples() {
        let t = Lattice::torus(1, 1).unwrap();
        let idx: Vec<usize> = [-1, 0, 1].iter().map(|&c| t.site_index(&s(&[c])).unwrap()).collect();
        assert_eq!(idx, vec![0, 1, 2]);
        assert_eq!(Lattice::torus(2, 2).unwrap().size(), Some(25));
        assert!(t.site_index(&s(&[3])).is_err());
        assert!(t.site_at(3).is_err());
        assert!(Lattice::infinite(1).unwrap().site_index(&s(&[0])).is_err());
    }

    #[test]
    fn rejects_degenerate_geometry() {
        assert!(Lattice::torus(1, 0).is_err());
        assert!(Lattice::torus(0, 1).is_err());
        assert!(Lattice::infinite(MAX_DIM + 1).is_err());
    }

    #[test]
    fn index_round_trip_d2() {
        let t = Lattice::torus(2, 2).unwrap();
        for i in 0..25 {
            let x = t.site_at(i).unwrap();
            assert_eq!(t.site_index(&x).unwrap(), i);
        }
        assert_eq!(t.sites().count(), 25);
    }

    #[test]
    fn neighbor_weights_sum_to_one() {
        // 2d neighbors each with weight 1/(2d): exact in integer terms.
        for d in 1..=MAX_DIM {
            let t = Lattice::torus(d, 1).unwrap();
            let nbrs = t.neighbors(&Site::origin(d)).unwrap();
            assert_eq!(nbrs.len(), 2 * d);
        }
    }

    #[test]
    fn neighbor_table_has_no_self_loops() {
        let t = Lattice::torus(2, 1).unwrap();
        let table = t.neighbor_table().unwrap();
        for (i, row) in table.chunks(4).enumerate() {
            assert!(row.iter().all(|&j| j != i));
            let mut sorted = row.to_vec();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
        }
    }

    proptest! {
        #[test]
        fn wrap_is_periodic(d in 1usize..=3, n in 1u32..5, raw in proptest::collection::vec(-20i64..20, 3), axis in 0usize..3) {
            let t = Lattice::torus(d, n).unwrap();
            let axis = axis % d;
            let base = &raw[..d];
            let x = t.wrap(base).unwrap();
            prop_assert!(t.contains(&x));
            let mut shifted: Vec<i64> = base.to_vec();
            shifted[axis] += 2 * n as i64 + 1;
            prop_assert_eq!(t.wrap(&shifted).unwrap(), x);
            let xs: Vec<i64> = x.coords().iter().map(|&c| c as i64).collect();
            prop_assert_eq!(t.wrap(&xs).unwrap(), x);
        }

        #[test]
        fn neighbors_are_symmetric(d in 1usize..=3, n in 1u32..4, idx in 0usize..1000) {
            let t = Lattice::torus(d, n).unwrap();
            let x = t.site_at(idx % t.size().unwrap()).unwrap();
            for y in t.neighbors(&x).unwrap() {
                prop_assert!(t.neighbors(&y).unwrap().contains(&x));
            }
        }

        #[test]
        fn zd_neighbors_are_symmetric(a in -50i32..50, b in -50i32..50) {
            let z = Lattice::infinite(2).unwrap();
            let x = Site::new(&[a, b]);
            for y in z.neighbors(&x).unwrap() {
                prop_assert!(z.neighbors(&y).unwrap().contains(&x));
            }
        }
    }
}
