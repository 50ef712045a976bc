use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "kebab-case")]
pub enum CostPlan {
    Pipeline,
    /// Train only on each new CVE, for `epochs` passes.
    IncrementalFt { epochs: u32 },
    /// Retrain on everything seen so far at every `interval`-th CVE.
    NonIncrementalFt { interval: u32 },
}

impl CostPlan {
    /// `pipeline`, `incremental:<epochs>` or `non-incremental:<interval>`.
    pub fn parse(s: &str) -> Option<Self> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let num = || arg.and_then(|a| a.parse::<u32>().ok()).filter(|&n| n > 0);
        match name {
            "pipeline" if arg.is_none() => Some(CostPlan::Pipeline),
            "incremental" | "incremental-ft" => num().map(|epochs| CostPlan::IncrementalFt { epochs }),
            "non-incremental" | "non-incremental-ft" => num().map(|interval| CostPlan::NonIncrementalFt { interval }),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            CostPlan::Pipeline => "pipeline".into(),
            CostPlan::IncrementalFt { epochs } => format!("incremental:{epochs}"),
            CostPlan::NonIncrementalFt { interval } => format!("non-incremental:{interval}"),
        }
    }
}

/// Prices are currency units per million tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Training tokens contributed by one CVE's data.
    pub tokens_per_cve: f64,
    pub train_price_per_mtok: f64,
    /// Epochs of each from-scratch retrain in the non-incremental plan.
    pub retrain_epochs: u32,
    pub pipeline_tokens_per_run: f64,
    pub inference_price_per_mtok: f64,
    pub runs_per_cve: f64,
    /// Embedding tokens needed to add one CVE to the knowledge base.
    pub kb_tokens_per_cve: f64,
    pub embed_price_per_mtok: f64,
}

impl Default for CostParams {
    /// Illustrative values in USD: a GPT-4o-class training price and
    /// per-run token counts of the same order as the pipeline's prompts.
    fn default() -> Self {
        CostParams {
            tokens_per_cve: 3979.0,
            train_price_per_mtok: 25.0,
            retrain_epochs: 5,
            pipeline_tokens_per_run: 30_000.0,
            inference_price_per_mtok: 2.5,
            runs_per_cve: 1.0,
            kb_tokens_per_cve: 8_000.0,
            embed_price_per_mtok: 0.02,
        }
    }
}

impl CostParams {
    fn train_cost(&self, tokens: f64) -> f64 {
        tokens * self.train_price_per_mtok / 1e6
    }

    pub fn per_run_cost(&self) -> f64 {
        self.pipeline_tokens_per_run * self.inference_price_per_mtok / 1e6
    }

    pub fn kb_update_cost(&self) -> f64 {
        self.kb_tokens_per_cve * self.embed_price_per_mtok / 1e6
    }

    pub fn validate(&self) -> Result<(), String> {
        let vals = [
            self.tokens_per_cve,
            self.train_price_per_mtok,
            self.pipeline_tokens_per_run,
            self.inference_price_per_mtok,
            self.runs_per_cve,
            self.kb_tokens_per_cve,
            self.embed_price_per_mtok,
        ];
        if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.retrain_epochs == 0 {
            return Err("cost parameters must be finite and non-negative, with retrain_epochs > 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCurve {
    pub plan: CostPlan,
    /// `cumulative[i]` is the total after `i + 1` CVEs.
    pub cumulative: Vec<f64>,
}

impl CostCurve {
    pub fn at(&self, n: usize) -> f64 {
        if n == 0 {
            0.0
        } else {
            self.cumulative[n - 1]
        }
    }
}

/// Cumulative cost after each of `n` CVEs, accumulated event by event.
///
/// For the non-incremental plan the value after CVE `j` also includes one
/// catch-up retrain on all `j` CVEs when `j` is not a multiple of the
/// interval, so every point prices a model that covers everything seen.
pub fn cost_projection(plan: CostPlan, n: usize, params: &CostParams) -> CostCurve {
    let mut cumulative = Vec::with_capacity(n);
    let mut spent = 0.0;
    for j in 1..=n {
        let point = match plan {
            CostPlan::Pipeline => {
                spent += params.runs_per_cve * params.per_run_cost() + params.kb_update_cost();
                spent
            }
            CostPlan::IncrementalFt { epochs } => {
                spent += f64::from(epochs) * params.train_cost(params.tokens_per_cve);
                spent
            }
            CostPlan::NonIncrementalFt { interval } => {
                let retrain = f64::from(params.retrain_epochs) * params.train_cost(j as f64 * params.tokens_per_cve);
                if j % interval as usize == 0 {
                    spent += retrain;
                    spent
                } else {
                    spent + retrain
                }
            }
        };
        cumulative.push(point);
    }
    CostCurve { plan, cumulative }
}
