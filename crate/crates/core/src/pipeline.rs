//! End-to-end run: summarize, score every candidate, rank, verify, then
//! alternate patching and re-verification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{patch, verify, AgentError, PatchResult, VerificationVerdict, DEFAULT_REPROMPTS};
use crate::dataflow::{describe_entities, extract_dfg, flow_cosines, map_symbols, DataFlowGraph, EntityDescriptions, SymbolMapping};
use crate::kb::{CveEntry, KbStore};
use crate::provider::{Gateway, UsageRecord, UsageSummary};
use crate::ranker::{rank, RankModel, SimilarityFeatures};
use crate::semantic::{context_cosine, extract_keywords, fuzzy_jaccard, summarize_target, KeywordSet, SemanticError, SemanticSummary, Vocabulary, DEFAULT_THRESHOLD};
use crate::{CodeArtifact, Error};

pub const DEFAULT_MAX_LOOPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_loops: usize,
    pub reprompts: u32,
    pub fuzzy_threshold: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { max_loops: DEFAULT_MAX_LOOPS, reprompts: DEFAULT_REPROMPTS, fuzzy_threshold: DEFAULT_THRESHOLD }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    CleanNoMatch,
    CleanVerified,
    PatchedClean,
    IterationCapReached,
    Error,
}

/// One iteration of the patch loop.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PatchStep {
    Patched(PatchResult),
    /// The agent returned the input unchanged.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub exit_code: i32,
    pub message: String,
}

/// Everything derived from the target alone, computed once per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetProfile {
    pub summary: SemanticSummary,
    pub summary_embedding: Vec<f64>,
    pub keywords: KeywordSet,
    pub dfg: DataFlowGraph,
    pub descriptions: EntityDescriptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub target: CodeArtifact,
    pub profile: Option<TargetProfile>,
    pub features_all: Vec<SimilarityFeatures>,
    pub matched: Option<SimilarityFeatures>,
    pub mapping: Option<SymbolMapping>,
    pub verdicts: Vec<VerificationVerdict>,
    pub patches: Vec<PatchStep>,
    pub loop_count: usize,
    pub final_code: String,
    pub outcome: Outcome,
    pub error: Option<RunFailure>,
    /// Ledger records of this run; each digest names a replay archive entry.
    pub usage: Vec<UsageRecord>,
    pub usage_summary: UsageSummary,
}

impl PipelineRun {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run serializes");
        s.push('\n');
        s
    }
}

/// Four similarity features of `entry` against a profiled target.
pub fn compute_features(profile: &TargetProfile, entry: &CveEntry, threshold: f64) -> Result<SimilarityFeatures, SemanticError> {
    let j = fuzzy_jaccard(&profile.keywords, &entry.keywords, threshold);
    let c_desc = context_cosine(&profile.summary_embedding, &entry.emb_description)?;
    let (c_var, c_func) = flow_cosines(&profile.descriptions, entry)?;
    Ok(SimilarityFeatures::new(entry.cve_id.clone(), j, c_desc, c_var, c_func))
}

pub struct Pipeline<'a> {
    pub gateway: &'a Gateway,
    pub kb: &'a KbStore,
    pub model: &'a RankModel,
    pub vocabulary: &'a Vocabulary,
    pub config: PipelineConfig,
}

struct State {
    run: PipelineRun,
}

impl<'a> Pipeline<'a> {
    /// Summary, keywords, DFG and embedded entity descriptions of `target`.
    pub fn profile(&self, target: &CodeArtifact, imported: Option<DataFlowGraph>) -> Result<TargetProfile, Error> {
        let summary = summarize_target(self.gateway, &target.code, self.config.reprompts)?;
        let summary_embedding = self.gateway.embed(&summary.text)?;
        let keywords = extract_keywords(&target.intent, self.vocabulary);
        let dfg = match imported {
            Some(d) => d,
            None => extract_dfg(&target.code)?,
        };
        let mut descriptions = describe_entities(self.gateway, &target.code, &dfg, &target.supplementary, self.config.reprompts)?;
        descriptions.embed(self.gateway)?;
        Ok(TargetProfile { summary, summary_embedding, keywords, dfg, descriptions })
    }

    /// Features against every KB entry, in ascending cve_id order.
    pub fn score_candidates(&self, profile: &TargetProfile) -> Result<Vec<SimilarityFeatures>, Error> {
        let entries = self.kb.scan_candidates();
        let feats: Result<Vec<_>, SemanticError> =
            entries.par_iter().map(|e| compute_features(profile, e, self.config.fuzzy_threshold)).collect();
        Ok(feats?)
    }

    pub fn run(&self, target: CodeArtifact, imported: Option<DataFlowGraph>) -> PipelineRun {
        let start = self.gateway.ledger().len();
        let mut st = State {
            run: PipelineRun {
                final_code: target.code.clone(),
                target,
                profile: None,
                features_all: vec![],
                matched: None,
                mapping: None,
                verdicts: vec![],
                patches: vec![],
                loop_count: 0,
                outcome: Outcome::Error,
                error: None,
                usage: vec![],
                usage_summary: UsageSummary::default(),
            },
        };
        if let Err(e) = self.drive(&mut st, imported) {
            st.run.outcome = Outcome::Error;
            st.run.error = Some(RunFailure { exit_code: e.exit_code(), message: e.to_string() });
        }
        st.run.usage = self.gateway.ledger().since(start);
        st.run.usage_summary = UsageSummary::of(&st.run.usage);
        st.run
    }

    fn drive(&self, st: &mut State, imported: Option<DataFlowGraph>) -> Result<(), Error> {
        if self.kb.is_empty() {
            return Err(Error::Config("knowledge base is empty".into()));
        }
        let run = &mut st.run;
        let profile = self.profile(&run.target, imported)?;
        run.features_all = self.score_candidates(&profile)?;
        run.profile = Some(profile);
        let ranking = rank(&run.features_all, self.model)?;
        run.features_all = ranking.scored;
        let Some(best) = ranking.best else {
            run.outcome = Outcome::CleanNoMatch;
            return Ok(());
        };
        let entry = self.kb.retrieve(&best.candidate_cve_id)?;
        run.matched = Some(best);
        let profile = run.profile.as_ref().expect("set above");
        let mapping = map_symbols(self.gateway, &profile.descriptions, entry)?;
        run.mapping = Some(mapping.clone());

        let reprompts = self.config.reprompts;
        let mut current = run.target.clone();
        let mut verdict = verify(self.gateway, entry, &mapping, &current, reprompts)?;
        run.verdicts.push(verdict.clone());
        if !verdict.result {
            run.outcome = Outcome::CleanVerified;
            return Ok(());
        }
        while verdict.result && run.loop_count < self.config.max_loops {
            match patch(self.gateway, entry, &mapping, &current, &verdict.root_cause, reprompts) {
                Ok(p) => {
                    current = current.with_code(p.patched_code.clone());
                    run.patches.push(PatchStep::Patched(p));
                }
                Err(AgentError::DegeneratePatch) => run.patches.push(PatchStep::Degenerate),
                Err(e) => return Err(e.into()),
            }
            run.loop_count += 1;
            run.final_code = current.code.clone();
            verdict = verify(self.gateway, entry, &mapping, &current, reprompts)?;
            run.verdicts.push(verdict.clone());
        }
        run.outcome = if verdict.result { Outcome::IterationCapReached } else { Outcome::PatchedClean };
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopStatistics {
    pub max: usize,
    pub min: usize,
    pub mean: f64,
    pub runs: usize,
}

/// Max, min and mean loop count over runs that patched at least once.
pub fn loop_statistics(loop_counts: impl IntoIterator<Item = usize>) -> Option<LoopStatistics> {
    let eligible: Vec<usize> = loop_counts.into_iter().filter(|&c| c >= 1).collect();
    if eligible.is_empty() {
        return None;
    }
    Some(LoopStatistics {
        max: *eligible.iter().max().expect("nonempty"),
        min: *eligible.iter().min().expect("nonempty"),
        mean: eligible.iter().sum::<usize>() as f64 / eligible.len() as f64,
        runs: eligible.len(),
    })
}
