use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::scenario::int_args;
use super::DomainError;
use crate::ground::{ground, GroundRule};
use crate::solve::{gl_reduct, least_model};
use crate::syntax::Program;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub uatm: i64,
    pub waypoints: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corridor {
    pub from: i64,
    pub to: i64,
    /// Waypoints declared by `edge_range`, ascending; empty when unranged.
    pub waypoints: Vec<i64>,
    pub coverage: Vec<Coverage>,
}

impl Corridor {
    pub fn key(&self) -> (i64, i64) {
        (self.from, self.to)
    }

    pub fn covered_by(&self, uatm: i64) -> &[i64] {
        self.coverage
            .iter()
            .find(|c| c.uatm == uatm)
            .map(|c| c.waypoints.as_slice())
            .unwrap_or(&[])
    }

    pub fn covering(&self, waypoint: i64) -> Vec<i64> {
        self.coverage
            .iter()
            .filter(|c| c.waypoints.binary_search(&waypoint).is_ok())
            .map(|c| c.uatm)
            .collect()
    }

    /// Waypoints covered by exactly the given set of UATMs.
    pub fn covered_exactly(&self, uatms: &[i64]) -> Vec<i64> {
        let want: BTreeSet<i64> = uatms.iter().copied().collect();
        self.waypoints
            .iter()
            .copied()
            .filter(|&w| self.covering(w).into_iter().collect::<BTreeSet<_>>() == want)
            .collect()
    }

    pub fn uncovered(&self) -> Vec<i64> {
        self.covered_exactly(&[])
    }
}

/// The environment as a graph of vertiports and covered corridors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VertiportNetwork {
    pub vertiports: Vec<i64>,
    pub uatms: Vec<i64>,
    pub corridors: Vec<Corridor>,
    /// `cover(uatm, vertiport)` facts, by UATM.
    pub ownership: BTreeMap<i64, Vec<i64>>,
}

impl VertiportNetwork {
    pub fn corridor(&self, key: (i64, i64)) -> Option<&Corridor> {
        self.corridors.iter().find(|c| c.key() == key)
    }

    pub fn covering(&self, corridor: (i64, i64), waypoint: i64) -> Vec<i64> {
        self.corridor(corridor)
            .map(|c| c.covering(waypoint))
            .unwrap_or_default()
    }
}

/// Builds the network from the least model of a definite environment
/// program.
pub fn build_network_view(env: &Program) -> Result<VertiportNetwork, DomainError> {
    let g = ground(env)?;
    for r in &g.rules {
        let definite = matches!(r, GroundRule::Normal { neg, .. } if neg.is_empty());
        if !definite {
            return Err(DomainError::MalformedEnvironment(format!(
                "not a definite program: `{}`",
                g.rule_text(r)
            )));
        }
    }
    let model = least_model(&gl_reduct(&g, &BTreeSet::new()));

    let mut vertiports = BTreeSet::new();
    let mut uatms = BTreeSet::new();
    let mut edges: Vec<(i64, i64)> = Vec::new();
    let mut ranges: BTreeMap<(i64, i64), BTreeSet<i64>> = BTreeMap::new();
    let mut coverage: BTreeMap<(i64, i64), BTreeMap<i64, BTreeSet<i64>>> = BTreeMap::new();
    let mut ownership: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for &id in &model {
        let a = g.atom(id);
        if let Some(v) = int_args(a, "vp", 1) {
            vertiports.insert(v[0]);
        } else if let Some(v) = int_args(a, "uatm", 1) {
            uatms.insert(v[0]);
        } else if let Some(v) = int_args(a, "edge", 2) {
            edges.push((v[0], v[1]));
        } else if let Some(v) = int_args(a, "edge_range", 3) {
            ranges.entry((v[0], v[1])).or_default().insert(v[2]);
        } else if let Some(v) = int_args(a, "covered_wp", 4) {
            coverage
                .entry((v[0], v[1]))
                .or_default()
                .entry(v[2])
                .or_default()
                .insert(v[3]);
        } else if let Some(v) = int_args(a, "cover", 2) {
            ownership.entry(v[0]).or_default().push(v[1]);
        }
    }
    // The model is in id order, which follows source order for facts.
    let mut seen = BTreeSet::new();
    edges.retain(|e| seen.insert(*e));
    for key in ranges.keys().chain(coverage.keys()) {
        if !edges.contains(key) {
            return Err(DomainError::MalformedEnvironment(format!(
                "corridor ({}, {}) has waypoints but no edge",
                key.0, key.1
            )));
        }
    }
    for o in ownership.values_mut() {
        o.sort_unstable();
        o.dedup();
    }
    let corridors = edges
        .into_iter()
        .map(|(from, to)| Corridor {
            from,
            to,
            waypoints: ranges
                .remove(&(from, to))
                .map(|s| s.into_iter().collect())
                .unwrap_or_default(),
            coverage: coverage
                .remove(&(from, to))
                .map(|m| {
                    m.into_iter()
                        .map(|(uatm, wps)| Coverage {
                            uatm,
                            waypoints: wps.into_iter().collect(),
                        })
                        .collect()
                })
                .unwrap_or_default(),
        })
        .collect();
    Ok(VertiportNetwork {
        vertiports: vertiports.into_iter().collect(),
        uatms: uatms.into_iter().collect(),
        corridors,
        ownership,
    })
}
