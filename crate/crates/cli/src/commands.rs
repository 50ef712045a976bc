use std::fs;
use std::path::{Path, PathBuf};

use autopatch_core::agents::{patch, verify, DEFAULT_REPROMPTS};
use autopatch_core::augment::{augment, augment_chain, augment_corpus, CorpusInput, Lexicon, Transform};
use autopatch_core::dataflow::{extract_dfg, map_symbols, DataFlowGraph, SymbolMapping};
use autopatch_core::eval::{cost_projection, sample_ratio, CostParams, CostPlan, EvalReport, LabeledSample, Mode, Prediction};
use autopatch_core::kb::{CweCategories, IngestContext, KbStore};
use autopatch_core::pipeline::{Outcome, Pipeline};
use autopatch_core::provider::http::HttpBackend;
use autopatch_core::provider::{Backend, Gateway, RecordingBackend, ReplayArchive, ReplayBackend, API_KEY_ENV};
use autopatch_core::ranker::{rank, synthetic_dataset, train, RankModel, SyntheticKind, TrainConfig, TrainingSample};
use autopatch_core::semantic::Vocabulary;
use autopatch_core::{CodeArtifact, Error};
use serde::Serialize;

use crate::config::{ConfigFile, ProviderSettings};
use crate::{Cli, Command, KbArgs, TargetArgs};

struct Ctx {
    replay: Option<PathBuf>,
    record: Option<PathBuf>,
    seed: Option<u64>,
    file: ConfigFile,
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T, Error> {
    serde_json::from_str(text).map_err(|e| Error::Eval(autopatch_core::eval::EvalError::Dataset(format!("{}: {e}", path.display()))))
}

/// A JSON array, or one JSON value per non-empty line.
fn json_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, Error> {
    let text = read(path)?;
    if text.trim_start().starts_with('[') {
        return parse_json(path, &text);
    }
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| parse_json(path, l)).collect()
}

fn pair(s: &str, what: &str) -> Result<(usize, usize), Error> {
    s.split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .ok_or_else(|| Error::Usage(format!("{what} must look like `N:M`, got `{s}`")))
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.seed.or(self.file.seed).unwrap_or(0)
    }

    fn kb_path(&self, kb: &KbArgs) -> Result<PathBuf, Error> {
        kb.kb.clone().or_else(|| self.file.kb.clone()).ok_or_else(|| Error::Usage("--kb is required (or set AUTOPATCH_KB or `kb` in the config file)".into()))
    }

    fn kb(&self, kb: &KbArgs) -> Result<KbStore, Error> {
        Ok(KbStore::open(self.kb_path(kb)?)?)
    }

    fn model(&self, path: &Option<PathBuf>) -> Result<RankModel, Error> {
        match path.clone().or_else(|| self.file.model_file.clone()) {
            Some(p) => Ok(RankModel::from_json(&read(&p)?)?),
            None => Ok(RankModel::default()),
        }
    }

    fn provider_settings(&self, profile: Option<&str>) -> Result<ProviderSettings, Error> {
        let mut s = self.file.provider.settings(profile)?;
        if let Ok(url) = std::env::var("AUTOPATCH_BASE_URL") {
            if !url.is_empty() {
                s.base_url = url;
            }
        }
        Ok(s)
    }

    fn provider_available(&self) -> bool {
        self.replay.is_some() || std::env::var(API_KEY_ENV).is_ok_and(|k| !k.is_empty())
    }

    fn gateway(&self, profile: Option<&str>) -> Result<Gateway, Error> {
        let s = self.provider_settings(profile)?;
        let backend: Box<dyn Backend> = if let Some(dir) = &self.replay {
            Box::new(ReplayBackend::new(ReplayArchive::open(dir)?))
        } else {
            let live = HttpBackend::from_env(&s.base_url, s.timeout)?;
            match &self.record {
                Some(dir) => Box::new(RecordingBackend::new(Box::new(live), ReplayArchive::create(dir)?)),
                None => Box::new(live),
            }
        };
        Ok(Gateway::new(backend, s.gateway))
    }

    fn reprompts(&self) -> u32 {
        self.file.pipeline.reprompts.unwrap_or(DEFAULT_REPROMPTS)
    }
}

fn artifact(t: &TargetArgs) -> Result<CodeArtifact, Error> {
    let mut a = CodeArtifact::new(read(&t.code)?, match &t.intent {
        Some(p) => read(p)?.trim().to_string(),
        None => String::new(),
    });
    if let Some(p) = &t.supplementary {
        a.supplementary = read(p)?;
    }
    Ok(a)
}

fn imported_dfg(t: &TargetArgs) -> Result<Option<DataFlowGraph>, Error> {
    match &t.dfg {
        Some(p) => Ok(Some(DataFlowGraph::from_json(&read(p)?)?)),
        None => Ok(None),
    }
}

pub fn dispatch(cli: Cli) -> Result<i32, Error> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile { schema: 1, ..ConfigFile::default() },
    };
    let ctx = Ctx { replay: cli.replay, record: cli.record, seed: cli.seed, file };
    match cli.command {
        Command::Ingest { path, kb, vocabulary, categories } => {
            let vocab = match vocabulary {
                Some(p) => Vocabulary::load(&p)?,
                None => Vocabulary::builtin(),
            };
            let cats = match categories {
                Some(p) => CweCategories::load(&p).map_err(Error::Config)?,
                None => CweCategories::builtin(),
            };
            let gw = if ctx.provider_available() || ctx.record.is_some() { Some(ctx.gateway(None)?) } else { None };
            let mut store = KbStore::open_or_create(ctx.kb_path(&kb)?)?;
            let ids = store.ingest_path(&path, &IngestContext { gateway: gw.as_ref(), vocabulary: &vocab, categories: &cats })?;
            for id in ids {
                println!("{id}");
            }
            Ok(0)
        }
        Command::Analyze { target, kb, model_file } => {
            let store = ctx.kb(&kb)?;
            let model = ctx.model(&model_file)?;
            let gw = ctx.gateway(None)?;
            let vocab = Vocabulary::builtin();
            let pipeline = Pipeline { gateway: &gw, kb: &store, model: &model, vocabulary: &vocab, config: ctx.file.pipeline.settings(None)? };
            let art = artifact(&target)?;
            let profile = pipeline.profile(&art, imported_dfg(&target)?)?;
            let ranking = rank(&pipeline.score_candidates(&profile)?, &model)?;
            #[derive(Serialize)]
            struct Report<'a> {
                summary: &'a str,
                keywords: &'a std::collections::BTreeSet<String>,
                ranking: &'a autopatch_core::ranker::Ranking,
            }
            print!("{}", pretty(&Report { summary: &profile.summary.text, keywords: &profile.keywords, ranking: &ranking }));
            Ok(0)
        }
        Command::Dfg { code, emit: out, import } => {
            let src = read(&code)?;
            match import {
                Some(p) => {
                    let g = DataFlowGraph::from_json(&read(&p)?)?;
                    if let Some(missing) = g.entities.iter().find(|e| !autopatch_core::dataflow::occurs_as_identifier(&src, &e.name)) {
                        return Err(Error::Dfg(autopatch_core::dataflow::DfgError::Schema(format!(
                            "entity `{}` does not occur in {}",
                            missing.name,
                            code.display()
                        ))));
                    }
                    println!("{}", g.render_flow());
                }
                None => {
                    let mut json = extract_dfg(&src)?.to_json();
                    json.push('\n');
                    emit(out.as_deref(), &json)?;
                }
            }
            Ok(0)
        }
        Command::Verify { target, kb, cve, mapping } => {
            let store = ctx.kb(&kb)?;
            let entry = store.retrieve(&cve)?;
            let gw = ctx.gateway(None)?;
            let art = artifact(&target)?;
            let mapping = resolve_mapping(&ctx, &gw, &store, &target, &art, entry, mapping.as_deref())?;
            let verdict = verify(&gw, entry, &mapping, &art, ctx.reprompts())?;
            print!("{}", pretty(&verdict));
            Ok(0)
        }
        Command::Patch { target, kb, cve, mapping, root_cause } => {
            let store = ctx.kb(&kb)?;
            let entry = store.retrieve(&cve)?;
            let gw = ctx.gateway(None)?;
            let art = artifact(&target)?;
            let root_cause = match root_cause.strip_prefix('@') {
                Some(p) => read(Path::new(p))?.trim().to_string(),
                None => root_cause,
            };
            let mapping = resolve_mapping(&ctx, &gw, &store, &target, &art, entry, mapping.as_deref())?;
            let result = patch(&gw, entry, &mapping, &art, &root_cause, ctx.reprompts())?;
            print!("{}", pretty(&result));
            Ok(0)
        }
        Command::Run { target, kb, model_file, max_loops, provider_profile, out } => {
            let store = ctx.kb(&kb)?;
            let model = ctx.model(&model_file)?;
            let config = ctx.file.pipeline.settings(max_loops)?;
            let gw = ctx.gateway(provider_profile.as_deref())?;
            let vocab = Vocabulary::builtin();
            let pipeline = Pipeline { gateway: &gw, kb: &store, model: &model, vocabulary: &vocab, config };
            let run = pipeline.run(artifact(&target)?, imported_dfg(&target)?);
            emit(out.as_deref(), &run.to_json())?;
            match (&run.outcome, &run.error) {
                (Outcome::Error, Some(f)) => {
                    eprintln!("error: {}", f.message);
                    Ok(f.exit_code)
                }
                _ => Ok(0),
            }
        }
        Command::Train { dataset, synthetic, samples, negatives, noise, epochs, batch, lr, margin, split, out } => {
            let seed = ctx.seed();
            let data: Vec<TrainingSample> = match (&dataset, &synthetic) {
                (Some(p), _) => json_records(p)?,
                (None, Some(kind)) => {
                    let kind = match kind.as_str() {
                        "separable" => SyntheticKind::Separable,
                        other => match other.strip_prefix("informative:").and_then(|k| k.parse::<usize>().ok()).filter(|k| *k < 4) {
                            Some(k) => SyntheticKind::Informative(k),
                            None => return Err(Error::Usage(format!("unknown synthetic dataset `{other}`"))),
                        },
                    };
                    synthetic_dataset(kind, samples, negatives, noise, seed)
                }
                (None, None) => return Err(Error::Usage("--dataset or --synthetic is required".into())),
            };
            let mut cfg = TrainConfig::new(seed);
            cfg.epochs = epochs.unwrap_or(cfg.epochs);
            cfg.batch_size = batch.unwrap_or(cfg.batch_size);
            cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
            cfg.margin = margin.unwrap_or(cfg.margin);
            let parts: Vec<u32> = split.split(':').map(|p| p.trim().parse()).collect::<Result<_, _>>().map_err(|_| Error::Usage(format!("bad --split `{split}`")))?;
            cfg.split = parts.try_into().map_err(|_| Error::Usage(format!("--split needs three parts, got `{split}`")))?;
            let model = train(&data, &cfg)?;
            write(&out, &model.to_json())?;
            if let Some(meta) = &model.training {
                print!("{}", pretty(&meta.accuracy));
            }
            Ok(0)
        }
        Command::Augment { input, transform, per_cve, lexicon, out } => {
            let lex = match lexicon {
                Some(p) => Lexicon::load(&p)?,
                None => Lexicon::builtin(),
            };
            let transforms: Vec<Transform> = match transform.as_deref() {
                None | Some("all") => vec![],
                Some(list) => list
                    .split(',')
                    .map(|t| Transform::parse(t.trim()).ok_or_else(|| Error::Usage(format!("unknown transform `{t}`"))))
                    .collect::<Result<_, _>>()?,
            };
            let seed = ctx.seed();
            if input.extension().is_some_and(|e| e == "json") {
                let inputs: Vec<CorpusInput> = json_records(&input)?;
                let manifest = augment_corpus(&inputs, pair(&per_cve, "--per-cve")?, &transforms, seed, &lex)?;
                emit(out.as_deref(), &pretty(&manifest))?;
            } else {
                if transforms.is_empty() {
                    return Err(Error::Usage("--transform is required for a single file".into()));
                }
                let code = read(&input)?;
                let key = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let a = if transforms.len() == 1 {
                    augment(&code, transforms[0], seed, &key, &lex)?
                } else {
                    augment_chain(&code, &transforms, seed, &key, &lex)?
                };
                if a.noop {
                    eprintln!("note: {} left the code unchanged", transform.unwrap_or_default());
                }
                emit(out.as_deref(), &a.code)?;
            }
            Ok(0)
        }
        Command::Eval { dataset, predictions, mode, ratio, json } => {
            let mode = Mode::parse(&mode).ok_or_else(|| Error::Usage(format!("--mode must be vuln-only or joint, got `{mode}`")))?;
            let mut samples: Vec<LabeledSample> = json_records(&dataset)?;
            if let Some(r) = ratio {
                samples = sample_ratio(&samples, pair(&r, "--ratio")?, ctx.seed())?;
            }
            let preds: Vec<Prediction> = json_records(&predictions)?;
            let ids: std::collections::HashSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
            let preds: Vec<Prediction> = preds.into_iter().filter(|p| ids.contains(p.sample_id.as_str())).collect();
            let report = EvalReport::build(&preds, &samples, mode)?;
            print!("{}", if json { pretty(&report) } else { report.to_text() });
            Ok(0)
        }
        Command::Cost { plan, n, params } => {
            let plans: Vec<CostPlan> = plan
                .iter()
                .map(|p| CostPlan::parse(p).ok_or_else(|| Error::Usage(format!("unknown plan `{p}`"))))
                .collect::<Result<_, _>>()?;
            let params = match params {
                Some(p) => cost_params(&read(&p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => CostParams::default(),
            };
            params.validate().map_err(Error::Config)?;
            let curves: Vec<_> = plans.iter().map(|p| cost_projection(*p, n, &params)).collect();
            let mut s = String::from("n");
            for c in &curves {
                s += &format!(",{}", c.plan.label());
            }
            s.push('\n');
            for j in 1..=n {
                s += &j.to_string();
                for c in &curves {
                    s += &format!(",{:.6}", c.at(j));
                }
                s.push('\n');
            }
            print!("{s}");
            Ok(0)
        }
    }
}

/// Default parameters overlaid with the keys present in `text`.
fn cost_params(text: &str) -> Result<CostParams, String> {
    let overlay: toml::Table = toml::from_str(text).map_err(|e| e.message().to_string())?;
    let mut base = toml::Table::try_from(CostParams::default()).map_err(|e| e.to_string())?;
    for (k, v) in overlay {
        if !base.contains_key(&k) {
            return Err(format!("unknown cost parameter `{k}`"));
        }
        let v = match v {
            toml::Value::Integer(i) if !k.ends_with("epochs") => toml::Value::Float(i as f64),
            other => other,
        };
        base.insert(k, v);
    }
    base.try_into().map_err(|e: toml::de::Error| e.message().to_string())
}

fn resolve_mapping(
    ctx: &Ctx,
    gw: &Gateway,
    store: &KbStore,
    target: &TargetArgs,
    art: &CodeArtifact,
    entry: &autopatch_core::kb::CveEntry,
    file: Option<&Path>,
) -> Result<SymbolMapping, Error> {
    if let Some(p) = file {
        let text = read(p)?;
        return serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", p.display())));
    }
    let vocab = Vocabulary::builtin();
    let model = RankModel::default();
    let pipeline = Pipeline { gateway: gw, kb: store, model: &model, vocabulary: &vocab, config: ctx.file.pipeline.settings(None)? };
    let profile = pipeline.profile(art, imported_dfg(target)?)?;
    Ok(map_symbols(gw, &profile.descriptions, entry)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_overlay() {
        let p = cost_params("tokens_per_cve = 1000\nretrain_epochs = 3\n").unwrap();
        assert_eq!(p.tokens_per_cve, 1000.0);
        assert_eq!(p.retrain_epochs, 3);
        assert_eq!(p.train_price_per_mtok, CostParams::default().train_price_per_mtok);
        assert!(cost_params("nope = 1\n").is_err());
    }

    #[test]
    fn ratio_pairs() {
        assert_eq!(pair("1:3", "x").unwrap(), (1, 3));
        assert!(pair("13", "x").is_err());
    }
}
