use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, Site};
use crate::rate_tree::RateTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Xi,
    Eta,
}

/// How sites map to storage slots.
#[derive(Debug, Clone)]
enum Slots {
    /// Torus: slot is the site index, neighbors are precomputed.
    Dense { neighbors: Arc<Vec<usize>> },
    /// `Z^d`: slots are handed out on first occupancy and recycled when a
    /// site empties.
    Sparse {
        index: FxHashMap<Site, usize>,
        sites: Vec<Site>,
        free: Vec<usize>,
    },
}

/// Two-type particle configuration `(ξ, η)` with cached totals.
///
/// Counts live in three Fenwick trees keyed by slot: `ξ(x)`, `η(x)` and
/// `ξ(x)η(x)`. Their totals are `Σξ`, `Ση` and the interaction sum.
#[derive(Debug, Clone)]
pub struct ParticleState {
    lattice: Lattice,
    slots: Slots,
    xi: RateTree,
    eta: RateTree,
    interaction: RateTree,
    clock: f64,
}

impl ParticleState {
    pub fn empty(lattice: Lattice) -> Self {
        let (slots, len) = match lattice.size() {
            Some(size) => (
                Slots::Dense {
                    neighbors: Arc::new(lattice.neighbor_table().expect("torus")),
                },
                size,
            ),
            None => (
                Slots::Sparse {
                    index: FxHashMap::default(),
                    sites: Vec::new(),
                    free: Vec::new(),
                },
                0,
            ),
        };
        ParticleState {
            lattice,
            slots,
            xi: RateTree::with_len(len),
            eta: RateTree::with_len(len),
            interaction: RateTree::with_len(len),
            clock: 0.0,
        }
    }

    /// `ξ ≡ θ₁`, `η ≡ θ₂` on a torus.
    pub fn constant(lattice: Lattice, theta1: u64, theta2: u64) -> Result<Self> {
        let size = lattice
            .size()
            .ok_or_else(|| Error::misuse("constant initial data needs a torus"))?;
        let mut state = ParticleState::empty(lattice);
        for slot in 0..size {
            state.set_counts(slot, theta1, theta2);
        }
        Ok(state)
    }

    /// Build from `(site, ξ, η)` entries; repeated sites accumulate.
    pub fn from_counts(lattice: Lattice, entries: &[(Site, u64, u64)]) -> Result<Self> {
        let mut state = ParticleState::empty(lattice);
        for (site, x, e) in entries {
            if !lattice.contains(site) {
                return Err(Error::misuse(format!("site {site:?} is not in {lattice:?}")));
            }
            if x + e == 0 {
                continue;
            }
            let slot = state.slot_or_insert(site);
            let (x0, e0) = (state.xi.get(slot), state.eta.get(slot));
            state.set_counts(slot, x0 + x, e0 + e);
        }
        Ok(state)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub(crate) fn set_clock(&mut self, t: f64) {
        self.clock = t;
    }

    pub fn total_xi(&self) -> u64 {
        self.xi.total()
    }

    pub fn total_eta(&self) -> u64 {
        self.eta.total()
    }

    /// `Σ_x ξ(x) η(x)`.
    pub fn interaction_sum(&self) -> u64 {
        self.interaction.total()
    }

    pub fn xi(&self, x: &Site) -> u64 {
        self.lookup(x).map_or(0, |s| self.xi.get(s))
    }

    pub fn eta(&self, x: &Site) -> u64 {
        self.lookup(x).map_or(0, |s| self.eta.get(s))
    }

    pub fn count(&self, species: Species, x: &Site) -> u64 {
        match species {
            Species::Xi => self.xi(x),
            Species::Eta => self.eta(x),
        }
    }

    /// Occupied sites of one species with their counts, in slot order.
    pub fn entries(&self, species: Species) -> Vec<(Site, u64)> {
        let tree = self.tree(species);
        (0..tree.len())
            .filter(|&s| tree.get(s) > 0)
            .map(|s| (self.site_of(s), tree.get(s)))
            .collect()
    }

    /// Counts in site-index order on a torus.
    pub fn field(&self, species: Species) -> Result<Vec<u64>> {
        if !self.lattice.is_torus() {
            return Err(Error::misuse("dense fields exist only on a torus"));
        }
        let tree = self.tree(species);
        Ok((0..tree.len()).map(|s| tree.get(s)).collect())
    }

    /// Number of sites holding at least one particle.
    pub fn occupied_sites(&self) -> usize {
        (0..self.xi.len())
            .filter(|&s| self.xi.get(s) + self.eta.get(s) > 0)
            .count()
    }

    /// Recompute every cached quantity from scratch and compare.
    pub fn check_invariants(&self) -> bool {
        let mut tx = 0;
        let mut te = 0;
        let mut ti = 0;
        for s in 0..self.xi.len() {
            let (x, e) = (self.xi.get(s), self.eta.get(s));
            tx += x;
            te += e;
            ti += x * e;
            if self.interaction.get(s) != x * e {
                return false;
            }
        }
        if let Slots::Sparse { index, sites, free } = &self.slots {
            // every live slot is indexed and holds particles, every free
            // slot is empty
            if index.len() + free.len() != sites.len() {
                return false;
            }
            for (site, &slot) in index {
                if sites[slot] != *site || self.xi.get(slot) + self.eta.get(slot) == 0 {
                    return false;
                }
            }
            if free.iter().any(|&s| self.xi.get(s) + self.eta.get(s) != 0) {
                return false;
            }
        }
        tx == self.total_xi() && te == self.total_eta() && ti == self.interaction_sum()
    }

    pub(crate) fn tree(&self, species: Species) -> &RateTree {
        match species {
            Species::Xi => &self.xi,
            Species::Eta => &self.eta,
        }
    }

    pub(crate) fn interaction_tree(&self) -> &RateTree {
        &self.interaction
    }

    fn lookup(&self, x: &Site) -> Option<usize> {
        match &self.slots {
            Slots::Dense { .. } => self.lattice.site_index(x).ok(),
            Slots::Sparse { index, .. } => index.get(x).copied(),
        }
    }

    pub(crate) fn site_of(&self, slot: usize) -> Site {
        match &self.slots {
            Slots::Dense { .. } => self.lattice.site_at(slot).expect("dense slot"),
            Slots::Sparse { sites, .. } => sites[slot],
        }
    }

    fn slot_or_insert(&mut self, x: &Site) -> usize {
        match &mut self.slots {
            Slots::Dense { .. } => self.lattice.site_index(x).expect("site on torus"),
            Slots::Sparse { index, sites, free } => {
                if let Some(&s) = index.get(x) {
                    return s;
                }
                let slot = match free.pop() {
                    Some(s) => {
                        sites[s] = *x;
                        s
                    }
                    None => {
                        sites.push(*x);
                        let s = self.xi.push_slot();
                        self.eta.push_slot();
                        self.interaction.push_slot();
                        s
                    }
                };
                index.insert(*x, slot);
                slot
            }
        }
    }

    fn set_counts(&mut self, slot: usize, xi: u64, eta: u64) {
        self.xi.set(slot, xi);
        self.eta.set(slot, eta);
        self.interaction.set(slot, xi * eta);
        if xi + eta == 0 {
            if let Slots::Sparse { index, sites, free } = &mut self.slots {
                if index.remove(&sites[slot]).is_some() {
                    free.push(slot);
                }
            }
        }
    }

    /// Move one particle of `species` from `slot` in direction `dir`.
    /// Returns the destination site.
    pub(crate) fn move_particle(&mut self, species: Species, slot: usize, dir: usize) -> Site {
        let (to_slot, to_site) = match &self.slots {
            Slots::Dense { neighbors } => {
                let t = neighbors[slot * 2 * self.lattice.dim() + dir];
                (t, None)
            }
            Slots::Sparse { sites, .. } => {
                let dest = self.lattice.neighbor(&sites[slot], dir);
                (usize::MAX, Some(dest))
            }
        };
        let to_slot = match to_site {
            Some(site) => self.slot_or_insert(&site),
            None => to_slot,
        };
        let (mut fx, mut fe) = (self.xi.get(slot), self.eta.get(slot));
        let (mut tx, mut te) = (self.xi.get(to_slot), self.eta.get(to_slot));
        match species {
            Species::Xi => {
                fx -= 1;
                tx += 1;
            }
            Species::Eta => {
                fe -= 1;
                te += 1;
            }
        }
        let dest = to_site.unwrap_or_else(|| self.site_of(to_slot));
        self.set_counts(to_slot, tx, te);
        self.set_counts(slot, fx, fe);
        dest
    }

    /// Replace one particle of `species` at `slot` by `offspring` particles.
    pub(crate) fn branch(&mut self, species: Species, slot: usize, offspring: u64) {
        let (mut x, mut e) = (self.xi.get(slot), self.eta.get(slot));
        match species {
            Species::Xi => x = x - 1 + offspring,
            Species::Eta => e = e - 1 + offspring,
        }
        self.set_counts(slot, x, e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_state_totals() {
        let lat = Lattice::torus(2, 1).unwrap();
        let s = ParticleState::constant(lat, 2, 3).unwrap();
        assert_eq!(s.total_xi(), 18);
        assert_eq!(s.total_eta(), 27);
        assert_eq!(s.interaction_sum(), 54);
        assert!(s.check_invariants());
        assert!(ParticleState::constant(Lattice::infinite(1).unwrap(), 1, 1).is_err());
    }

    #[test]
    fn sparse_sites_come_and_go() {
        let lat = Lattice::infinite(2).unwrap();
        let o = Site::origin(2);
        let mut s = ParticleState::from_counts(lat, &[(o, 1, 0)]).unwrap();
        assert_eq!(s.occupied_sites(), 1);
        let slot = s.lookup(&o).unwrap();
        let dest = s.move_particle(Species::Xi, slot, 0);
        assert_eq!(dest, Site::new(&[1, 0]));
        assert_eq!(s.xi(&o), 0);
        assert_eq!(s.xi(&dest), 1);
        assert_eq!(s.occupied_sites(), 1);
        assert!(s.lookup(&o).is_none());
        assert!(s.check_invariants());
        // the freed slot is reused
        let slot = s.lookup(&dest).unwrap();
        let back = s.move_particle(Species::Xi, slot, 1);
        assert_eq!(back, o);
        assert!(s.check_invariants());
        assert_eq!(s.entries(Species::Xi), vec![(o, 1)]);
    }

    #[test]
    fn branching_updates_interaction() {
        let lat = Lattice::infinite(1).unwrap();
        let o = Site::origin(1);
        let mut s = ParticleState::from_counts(lat, &[(o, 2, 3)]).unwrap();
        assert_eq!(s.interaction_sum(), 6);
        let slot = s.lookup(&o).unwrap();
        s.branch(Species::Xi, slot, 0);
        assert_eq!(s.interaction_sum(), 3);
        s.branch(Species::Eta, slot, 2);
        assert_eq!(s.interaction_sum(), 4);
        s.branch(Species::Xi, slot, 0);
        assert_eq!(s.total_xi(), 0);
        assert!(s.check_invariants());
        assert_eq!(s.entries(Species::Xi), vec![]);
        assert_eq!(s.entries(Species::Eta), vec![(o, 4)]);
    }

    #[test]
    fn from_counts_rejects_foreign_sites() {
        let lat = Lattice::torus(1, 1).unwrap();
        assert!(ParticleState::from_counts(lat, &[(Site::new(&[5]), 1, 0)]).is_err());
    }
}
