//! Averaging the end-to-end BLER around the circular trajectory.

use rayon::prelude::*;

use crate::chanmodel::FasSpectrum;
use crate::error::{Error, Result};
use crate::geometry::{link_state, Hop, LinkType, ScenarioConfig};
use crate::quadrature::{AngleNode, ThetaRule};

use super::closed_form::{hop1_dispatch, Hop2Kernel};
use super::{mixture_bler, BlerBreakdown, FblParams};

/// Power-independent data at one quadrature node.
#[derive(Debug, Clone, Copy)]
struct NodeData {
    node: AngleNode,
    /// LoS probability of hop 1 and hop 2.
    p_los: [f64; 2],
    /// Hop-1 average BLER per link type.
    hop1: [f64; 2],
    /// Hop-2 rate parameter per link type at `P₂ = 1 W`.
    vartheta2_unit: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeBreakdown {
    pub theta: f64,
    pub weight: f64,
    pub breakdown: BlerBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub overall: f64,
    pub nodes: Vec<NodeBreakdown>,
}

/// Trajectory-averaged BLER for a fixed scenario, spectrum and blocklength,
/// evaluated repeatedly over `P₂`.
#[derive(Debug, Clone)]
pub struct TrajectoryModel {
    fbl: FblParams,
    fas: FasSpectrum,
    kernels: [Hop2Kernel; 2],
    nodes: Vec<NodeData>,
}

impl TrajectoryModel {
    pub fn new(cfg: &ScenarioConfig, fas: &FasSpectrum, fbl: &FblParams, rule: ThetaRule) -> Result<Self> {
        cfg.validate()?;
        let angles = rule.nodes();
        if angles.len() < 2 {
            return Err(Error::invalid("trajectory rule needs at least 2 nodes"));
        }
        let nodes = angles
            .iter()
            .map(|&node| {
                let mut hop1 = [0.0; 2];
                let mut vartheta2_unit = [0.0; 2];
                let mut p_los = [0.0; 2];
                let unit = FasSpectrum::fixed_position();
                for k in LinkType::BOTH {
                    let s1 = link_state(cfg, fas, 1.0, node.theta, Hop::First, k)?;
                    let s2 = link_state(cfg, &unit, 1.0, node.theta, Hop::Second, k)?;
                    hop1[k.index()] = hop1_dispatch(fbl, s1.vartheta, cfg.m_factor(k)).0;
                    vartheta2_unit[k.index()] = s2.vartheta;
                    p_los = [s1.p_los, s2.p_los];
                }
                Ok(NodeData {
                    node,
                    p_los,
                    hop1,
                    vartheta2_unit,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryModel {
            fbl: *fbl,
            fas: fas.clone(),
            kernels: kernels_for(cfg, fas)?,
            nodes,
        })
    }

    /// Same geometry and blocklength with a different port spectrum.
    pub fn with_spectrum(&self, cfg: &ScenarioConfig, fas: &FasSpectrum) -> Result<Self> {
        Ok(TrajectoryModel {
            fbl: self.fbl,
            fas: fas.clone(),
            kernels: kernels_for(cfg, fas)?,
            nodes: self.nodes.clone(),
        })
    }

    /// Replaces the first-hop averages by `f(θ) = [ε_LoS, ε_NLoS]`.
    pub fn with_hop1_bler(mut self, f: impl Fn(f64) -> [f64; 2]) -> Self {
        for n in &mut self.nodes {
            n.hop1 = f(n.node.theta);
        }
        self
    }

    pub fn fbl(&self) -> &FblParams {
        &self.fbl
    }

    pub fn spectrum(&self) -> &FasSpectrum {
        &self.fas
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn hop2_at(&self, n: &NodeData, p2: f64) -> [f64; 2] {
        [0, 1].map(|i| self.kernels[i].evaluate(&self.fbl, n.vartheta2_unit[i] / p2))
    }

    fn breakdown_at(&self, n: &NodeData, p2: f64) -> BlerBreakdown {
        BlerBreakdown::new(n.hop1, self.hop2_at(n, p2), n.p_los)
    }

    fn check_power(p2: f64) -> Result<()> {
        if !(p2 > 0.0 && p2.is_finite()) {
            return Err(Error::domain(format!("P2 must be positive and finite, got {p2}")));
        }
        Ok(())
    }

    /// Trajectory average and the per-node breakdowns.
    pub fn evaluate(&self, p2: f64) -> Result<TrajectoryResult> {
        Self::check_power(p2)?;
        let nodes: Vec<NodeBreakdown> = self
            .nodes
            .par_iter()
            .map(|n| NodeBreakdown {
                theta: n.node.theta,
                weight: n.node.weight,
                breakdown: self.breakdown_at(n, p2),
            })
            .collect();
        let overall = nodes.iter().map(|n| n.weight * n.breakdown.end_to_end).sum();
        Ok(TrajectoryResult { overall, nodes })
    }

    /// Trajectory-averaged end-to-end BLER.
    pub fn overall(&self, p2: f64) -> Result<f64> {
        Self::check_power(p2)?;
        let terms: Vec<f64> = self
            .nodes
            .par_iter()
            .map(|n| n.node.weight * self.breakdown_at(n, p2).end_to_end)
            .collect();
        Ok(terms.iter().sum())
    }

    /// Trajectory average of the mixed second-hop BLER alone.
    pub fn hop2_mixed_mean(&self, p2: f64) -> Result<f64> {
        Self::check_power(p2)?;
        let terms: Vec<f64> = self
            .nodes
            .par_iter()
            .map(|n| {
                let e = self.hop2_at(n, p2);
                n.node.weight * mixture_bler(e[0], e[1], n.p_los[1])
            })
            .collect();
        Ok(terms.iter().sum())
    }

    /// Trajectory average of the mixed first-hop BLER, the limit as `P₂ → ∞`.
    pub fn floor(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.node.weight * mixture_bler(n.hop1[0], n.hop1[1], n.p_los[0]))
            .sum()
    }
}

fn kernels_for(cfg: &ScenarioConfig, fas: &FasSpectrum) -> Result<[Hop2Kernel; 2]> {
    Ok([
        Hop2Kernel::new(cfg.m_los, fas.retained())?,
        Hop2Kernel::new(cfg.m_nlos, fas.retained())?,
    ])
}

/// Gauss–Chebyshev trajectory average with `m` nodes.
pub fn trajectory_avg_bler(
    cfg: &ScenarioConfig,
    fas: &FasSpectrum,
    fbl: &FblParams,
    p2: f64,
    m: usize,
) -> Result<TrajectoryResult> {
    TrajectoryModel::new(cfg, fas, fbl, ThetaRule::GaussChebyshev(m))?.evaluate(p2)
}

/// First-hop limit of [`trajectory_avg_bler`].
pub fn error_floor(cfg: &ScenarioConfig, fbl: &FblParams, m: usize) -> Result<f64> {
    let fas = FasSpectrum::fixed_position();
    Ok(TrajectoryModel::new(cfg, &fas, fbl, ThetaRule::GaussChebyshev(m))?.floor())
}
