//! Region injectivity, coverings by disjoint regions and the greedy search
//! for an injective tiling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{LatticeGraph, Region};
use crate::peps::{Peps, Settings};
use crate::scalar::Scalar;

/// Outcome of a rank test on `Γ_R`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub region: Vec<usize>,
    /// `|E|`.
    pub boundary_legs: usize,
    /// `d^{|R|}`.
    pub physical_dim: u128,
    /// `D^{|E|}`.
    pub virtual_dim: u128,
    pub rank: usize,
    pub injective: bool,
    pub rtol: f64,
}

/// Rank test of `Γ_R`: injective iff the rank equals `D^{|E|}`.
pub fn check_injective<K: Scalar>(p: &Peps<K>, r: &Region, settings: &Settings) -> Result<InjectivityReport> {
    let (physical_dim, virtual_dim) = p.boundary_shape(r)?;
    let boundary_legs = p.graph().boundary(r)?.legs.len();
    let rank = p.range_space(r, settings)?.dim();
    Ok(InjectivityReport {
        region: r.members().to_vec(),
        boundary_legs,
        physical_dim,
        virtual_dim,
        rank,
        injective: rank as u128 == virtual_dim,
        rtol: settings.rtol,
    })
}

/// Checks that the union of two disjoint injective regions is injective.
/// `Ok(false)` would contradict the union property and signals a bug.
pub fn union_preserves_injectivity_test<K: Scalar>(
    p: &Peps<K>,
    r: &Region,
    s: &Region,
    settings: &Settings,
) -> Result<bool> {
    if !r.is_disjoint(s)? {
        return Err(Error::invalid("regions overlap"));
    }
    for (name, region) in [("first", r), ("second", s)] {
        if !check_injective(p, region, settings)?.injective {
            return Err(Error::invalid(format!("{name} region {:?} is not injective", region.members())));
        }
    }
    Ok(check_injective(p, &r.union(s)?, settings)?.injective)
}

/// Disjoint regions covering every vertex, with the induced super-lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct Covering {
    regions: Vec<Region>,
    super_edges: Vec<(usize, usize)>,
}

impl Covering {
    pub fn new(graph: &LatticeGraph, regions: Vec<Region>) -> Result<Self> {
        let mut owner = vec![None; graph.num_vertices()];
        for (i, r) in regions.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::invalid(format!("region {i} is empty")));
            }
            graph.boundary(r)?;
            for &v in r.members() {
                if let Some(j) = owner[v].replace(i) {
                    return Err(Error::invalid(format!("vertex {v} lies in regions {j} and {i}")));
                }
            }
        }
        if let Some(v) = owner.iter().position(Option::is_none) {
            return Err(Error::invalid(format!("vertex {v} is not covered")));
        }
        let mut super_edges = Vec::new();
        for i in 0..regions.len() {
            for j in i + 1..regions.len() {
                if graph.are_adjacent(&regions[i], &regions[j])? {
                    super_edges.push((i, j));
                }
            }
        }
        Ok(Covering { regions, super_edges })
    }

    /// Covering from plain member lists.
    pub fn from_members(graph: &LatticeGraph, members: &[Vec<usize>]) -> Result<Self> {
        let regions = members
            .iter()
            .map(|m| graph.region(m.iter().copied()))
            .collect::<Result<Vec<_>>>()?;
        Covering::new(graph, regions)
    }

    /// One region per vertex.
    pub fn singletons(graph: &LatticeGraph) -> Result<Self> {
        let members: Vec<Vec<usize>> = graph.vertices().map(|v| vec![v]).collect();
        Covering::from_members(graph, &members)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    /// Pairs `(α, β)`, `α < β`, of regions joined by an edge.
    pub fn super_edges(&self) -> &[(usize, usize)] {
        &self.super_edges
    }

    /// `R_α ∪ R_β` for every super-lattice edge.
    pub fn edge_regions(&self) -> Result<Vec<Region>> {
        self.super_edges
            .iter()
            .map(|&(a, b)| self.regions[a].union(&self.regions[b]))
            .collect()
    }
}

impl Serialize for Covering {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let regions: Vec<&[usize]> = self.regions.iter().map(|r| r.members()).collect();
        let mut st = s.serialize_struct("Covering", 2)?;
        st.serialize_field("regions", &regions)?;
        st.serialize_field("super_edges", &self.super_edges)?;
        st.end()
    }
}

/// A covering whose regions are all injective.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InjectiveTiling {
    pub covering: Covering,
    pub reports: Vec<InjectivityReport>,
}

impl InjectiveTiling {
    /// Checks every region of `covering`.
    pub fn verify<K: Scalar>(p: &Peps<K>, covering: Covering, settings: &Settings) -> Result<Self> {
        let reports = covering
            .regions()
            .iter()
            .map(|r| check_injective(p, r, settings))
            .collect::<Result<Vec<_>>>()?;
        if let Some(bad) = reports.iter().find(|r| !r.injective) {
            return Err(Error::invalid(format!(
                "region {:?} has rank {} < {}",
                bad.region, bad.rank, bad.virtual_dim
            )));
        }
        Ok(InjectiveTiling { covering, reports })
    }

    pub fn regions(&self) -> &[Region] {
        self.covering.regions()
    }

    pub fn super_edges(&self) -> &[(usize, usize)] {
        self.covering.super_edges()
    }
}

/// Result of [`find_injective_tiling`].
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TilingOutcome {
    Found(InjectiveTiling),
    /// The region grown last could not be made injective within the cap.
    Failed {
        region: Vec<usize>,
        report: InjectivityReport,
        covered: Vec<Vec<usize>>,
    },
}

impl TilingOutcome {
    pub fn tiling(&self) -> Option<&InjectiveTiling> {
        match self {
            TilingOutcome::Found(t) => Some(t),
            TilingOutcome::Failed { .. } => None,
        }
    }
}

/// Greedy tiling: seed each region at the first uncovered vertex and add the
/// adjacent uncovered vertex with the largest rank gain (lowest id on ties)
/// until the region is injective or reaches `max_region_size`.
pub fn find_injective_tiling<K: Scalar>(
    p: &Peps<K>,
    max_region_size: usize,
    settings: &Settings,
) -> Result<TilingOutcome> {
    if max_region_size == 0 {
        return Err(Error::invalid("region size cap must be at least 1"));
    }
    let graph = p.graph();
    let n = graph.num_vertices();
    let mut covered = vec![false; n];
    let mut regions: Vec<Region> = Vec::new();
    let mut reports = Vec::new();
    while let Some(seed) = covered.iter().position(|&c| !c) {
        let mut members = vec![seed];
        let mut report = check_injective(p, &graph.region([seed])?, settings)?;
        while !report.injective && members.len() < max_region_size {
            let mut candidates: Vec<usize> = members
                .iter()
                .flat_map(|&v| graph.neighbors(v))
                .filter(|&u| !covered[u] && !members.contains(&u))
                .collect();
            candidates.sort_unstable();
            candidates.dedup();
            let mut best: Option<(usize, InjectivityReport)> = None;
            for u in candidates {
                let trial = graph.region(members.iter().copied().chain([u]))?;
                let r = check_injective(p, &trial, settings)?;
                if best.as_ref().is_none_or(|(_, b)| r.rank > b.rank) {
                    best = Some((u, r));
                }
            }
            match best {
                Some((u, r)) => {
                    members.push(u);
                    report = r;
                }
                None => break,
            }
        }
        let region = graph.region(members.iter().copied())?;
        if !report.injective {
            let covered_lists = regions.iter().map(|r| r.members().to_vec()).collect();
            return Ok(TilingOutcome::Failed {
                region: region.members().to_vec(),
                report,
                covered: covered_lists,
            });
        }
        for &v in region.members() {
            covered[v] = true;
        }
        regions.push(region);
        reports.push(report);
    }
    let covering = Covering::new(graph, regions)?;
    Ok(TilingOutcome::Found(InjectiveTiling { covering, reports }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{generate_lattice, ring, LatticeKind, LatticeSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_peps(graph: LatticeGraph, d: usize, seed: u64) -> Peps<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Peps::random(graph, d, &mut rng).unwrap()
    }

    #[test]
    fn single_site_of_d5_square_torus_is_not_injective() {
        let g = generate_lattice(&LatticeSpec::new(LatticeKind::SquareTorus, &[4, 4])).unwrap();
        let p = random_peps(g.clone(), 5, 1);
        let s = Settings::default();
        let r = check_injective(&p, &g.region([0]).unwrap(), &s).unwrap();
        assert_eq!(r.boundary_legs, 4);
        assert_eq!(r.rank, 5);
        assert!(!r.injective);
    }

    #[test]
    fn product_state_is_injective_everywhere() {
        let g = ring(4, 1).unwrap();
        let p = random_peps(g.clone(), 2, 2);
        let s = Settings::default();
        for m in [vec![0], vec![1, 2], vec![0, 1, 2, 3]] {
            assert!(check_injective(&p, &g.region(m).unwrap(), &s).unwrap().injective);
        }
    }

    #[test]
    fn union_requires_disjoint_regions() {
        let g = ring(4, 2).unwrap();
        let p = random_peps(g.clone(), 4, 3);
        let s = Settings::default();
        let r = g.region([0]).unwrap();
        assert!(union_preserves_injectivity_test(&p, &r, &r, &s).is_err());
        let t = g.region([2]).unwrap();
        assert!(union_preserves_injectivity_test(&p, &r, &t, &s).unwrap());
    }

    #[test]
    fn covering_rejects_overlap_and_gaps() {
        let g = ring(4, 2).unwrap();
        assert!(Covering::from_members(&g, &[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(Covering::from_members(&g, &[vec![0, 1], vec![2]]).is_err());
        let c = Covering::from_members(&g, &[vec![0, 1], vec![2, 3]]).unwrap();
        assert_eq!(c.super_edges(), &[(0, 1)]);
    }

    #[test]
    fn tiling_of_ring_uses_single_sites() {
        let g = ring(5, 2).unwrap();
        let p = random_peps(g, 4, 4);
        let out = find_injective_tiling(&p, 3, &Settings::default()).unwrap();
        let t = out.tiling().unwrap();
        assert_eq!(t.regions().len(), 5);
        assert_eq!(t.super_edges().len(), 5);
    }

    #[test]
    fn tiling_fails_when_nothing_is_injective() {
        let g = ring(4, 2).unwrap();
        let ghz = Peps::<f64>::from_fn(g, 2, |_, idx| {
            if idx.iter().all(|&i| i == idx[0]) { 1.0 } else { 0.0 }
        })
        .unwrap();
        let out = find_injective_tiling(&ghz, 3, &Settings::default()).unwrap();
        assert!(matches!(out, TilingOutcome::Failed { .. }));
    }
}
