//! Link-prediction evaluation spread over a rayon pool.
//!
//! Ranks are computed per triple in parallel and collected in input order,
//! then aggregated exactly as the sequential path does, so both produce
//! identical metrics.

use kge_translate_core::evaluation::triple_ranks;
use kge_translate_core::{EmbeddingModel, Evaluation, Scorer, Triple, ValidationRanker};
use rayon::prelude::*;

use crate::error::{Error, Result};

pub struct ParallelEvaluator {
    pool: rayon::ThreadPool,
}

impl ParallelEvaluator {
    /// `threads == 0` lets rayon pick the number of threads.
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Usage(format!("cannot start {threads} evaluation threads: {e}")))?;
        Ok(ParallelEvaluator { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn evaluate(
        &self,
        model: &EmbeddingModel,
        triples: &[Triple],
        scorer: Scorer,
    ) -> kge_translate_core::Result<Evaluation> {
        if triples.is_empty() {
            return Err(kge_translate_core::Error::InvalidArgument(
                "no triples to evaluate".into(),
            ));
        }
        let pairs = self.pool.install(|| {
            triples
                .par_iter()
                .map(|t| triple_ranks(model, t, scorer))
                .collect::<kge_translate_core::Result<Vec<_>>>()
        })?;
        Evaluation::from_rank_pairs(&pairs)
    }
}

impl ValidationRanker for ParallelEvaluator {
    fn mean_rank(
        &self,
        model: &EmbeddingModel,
        triples: &[Triple],
    ) -> kge_translate_core::Result<f64> {
        Ok(self
            .evaluate(model, triples, Scorer::Translation)?
            .combined
            .mean_rank)
    }
}
