//! End-to-end run: samples → Grams → quadratures → projection.

use crate::basis::{BasisSpec, DomainMap, Family};
use crate::error::Result;
use crate::joint::{projection, ProjectionMatrix};
use crate::moments::{accumulate_grams, GramSet, Process, SampleSet};
use crate::spectral::{lebesgue_quadrature, quadrature_pair, LebesgueQuadrature, SolverOptions};

pub const DEFAULT_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub order: usize,
    pub family: Family,
    /// Overrides the domain fitted to the sample range.
    pub domain: Option<DomainMap>,
    pub solver: SolverOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            order: DEFAULT_ORDER,
            family: Family::Chebyshev,
            domain: None,
            solver: SolverOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn basis_for(&self, samples: &SampleSet) -> Result<BasisSpec> {
        let domain = match self.domain {
            Some(d) => d,
            None => DomainMap::fit(samples.x(), self.order)?,
        };
        BasisSpec::new(self.family, self.order, domain)
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub grams: GramSet,
    pub quad_f: LebesgueQuadrature,
    pub quad_g: Option<LebesgueQuadrature>,
    pub projection: Option<ProjectionMatrix>,
}

/// Runs the pipeline; `g` is solved in the f-eigenbasis when present.
pub fn analyze(samples: &SampleSet, config: &PipelineConfig) -> Result<Analysis> {
    let basis = config.basis_for(samples)?;
    let grams = accumulate_grams(samples, &basis, config.order)?;
    if grams.a_g.is_some() {
        let (quad_f, quad_g) = quadrature_pair(&grams, &config.solver)?;
        let s = projection(&quad_f, &quad_g, &grams)?;
        Ok(Analysis {
            grams,
            quad_f,
            quad_g: Some(quad_g),
            projection: Some(s),
        })
    } else {
        let quad_f = lebesgue_quadrature(&grams, Process::F, &config.solver)?;
        Ok(Analysis {
            grams,
            quad_f,
            quad_g: None,
            projection: None,
        })
    }
}
