#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub struct DfgCase {
    pub name: String,
    pub code: String,
    pub edges: BTreeSet<(String, String)>,
}

/// `fixtures/dfg/<name>.c` paired with `<name>.edges`, one `src -> a, b` line each.
pub fn dfg_cases() -> Vec<DfgCase> {
    let dir = fixtures().join("dfg");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "c").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let code = fs::read_to_string(dir.join(format!("{name}.c"))).unwrap();
            let listing = fs::read_to_string(dir.join(format!("{name}.edges"))).unwrap();
            let mut edges = BTreeSet::new();
            for line in listing.lines().filter(|l| !l.trim().is_empty()) {
                let (src, dsts) = line.split_once("->").expect("edge line");
                for d in dsts.split(',') {
                    edges.insert((src.trim().to_string(), d.trim().to_string()));
                }
            }
            DfgCase { name, code, edges }
        })
        .collect()
}

use autopatch_core::kb::KbStore;
use autopatch_core::pipeline::{Pipeline, PipelineConfig, PipelineRun};
use autopatch_core::provider::{Gateway, GatewayConfig, ReplayArchive, ReplayBackend};
use autopatch_core::ranker::RankModel;
use autopatch_core::semantic::Vocabulary;
use autopatch_core::CodeArtifact;

pub fn kb() -> KbStore {
    KbStore::open(fixtures().join("kb")).unwrap()
}

pub fn model() -> RankModel {
    RankModel::from_json(&fs::read_to_string(fixtures().join("model.json")).unwrap()).unwrap()
}

pub fn target(name: &str) -> CodeArtifact {
    let dir = fixtures().join("targets");
    CodeArtifact::new(
        fs::read_to_string(dir.join(format!("{name}.c"))).unwrap(),
        fs::read_to_string(dir.join(format!("{name}.intent"))).unwrap().trim().to_string(),
    )
}

pub fn replay_gateway(archive: &str) -> Gateway {
    let archive = ReplayArchive::open(fixtures().join("replay").join(archive)).unwrap();
    Gateway::new(Box::new(ReplayBackend::new(archive)), GatewayConfig::default())
}

/// Replays `archive` against `target` with the fixture KB and model.
pub fn replay_run(archive: &str, target_name: &str, max_loops: usize) -> (PipelineRun, Gateway) {
    let gw = replay_gateway(archive);
    let kb = kb();
    let model = model();
    let vocab = Vocabulary::builtin();
    let config = PipelineConfig { max_loops, ..PipelineConfig::default() };
    let run = Pipeline { gateway: &gw, kb: &kb, model: &model, vocabulary: &vocab, config }.run(target(target_name), None);
    (run, gw)
}

/// `### <role>` headers of a transcript, in order.
pub fn transcript_roles(t: &str) -> Vec<&str> {
    t.lines().filter_map(|l| l.strip_prefix("### ")).collect()
}
