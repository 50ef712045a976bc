//! Regenerates the replay fixtures under `fixtures/` from scripted agent
//! replies. Run with `cargo run -p autopatch-core --example gen_fixtures`.

use std::fs;
use std::path::{Path, PathBuf};

use autopatch_core::agents::{build_patch_prompt, build_verification_prompt};
use autopatch_core::dataflow::SymbolMapping;
use autopatch_core::kb::{CweCategories, IngestContext, KbStore};
use autopatch_core::pipeline::{Outcome, Pipeline, PipelineConfig};
use autopatch_core::provider::{Gateway, GatewayConfig, RecordingBackend, ReplayArchive, ScriptedBackend};
use autopatch_core::ranker::RankModel;
use autopatch_core::semantic::Vocabulary;
use autopatch_core::CodeArtifact;
use serde_json::json;

const DIM: usize = 64;
const SUMMARIZE: &str = "without any software security knowledge";
const DESCRIBE_VARS: &str = "each of the variables referenced";
const DESCRIBE_FUNCS: &str = "each of the functions referenced";
const VERIFY: &str = "to determine if it contains a vulnerability";
const PATCH: &str = "Your goal is to patch";

fn fenced(cot: &str, value: serde_json::Value) -> String {
    format!("Let's think step-by-step.\n{cot}\n\n```json\n{}\n```", serde_json::to_string_pretty(&value).unwrap())
}

fn system_has(needle: &'static str) -> impl Fn(&autopatch_core::provider::ChatRequest) -> bool + Send + Sync {
    move |r| r.messages.first().is_some_and(|m| m.content.contains(needle))
}

struct Target {
    code: String,
    intent: String,
}

fn target(root: &Path, name: &str) -> Target {
    Target {
        code: fs::read_to_string(root.join(format!("targets/{name}.c"))).unwrap(),
        intent: fs::read_to_string(root.join(format!("targets/{name}.intent"))).unwrap().trim().to_string(),
    }
}

fn zram_profile_rules(b: ScriptedBackend) -> ScriptedBackend {
    let summary = fenced(
        "1. The function sizes a table from the device size.\n2. It creates a pool and initializes slot locks.",
        json!({"result": "Allocates a zeroed slot table for a zram block device sized by its number of pages, creates the compressed memory pool named after the disk, releases the table when the pool cannot be created, records the huge class size and initializes the lock of every table slot."}),
    );
    let vars = fenced(
        "Each variable is traced through the data flow.",
        json!({
            "dev": "A pointer to the per device control structure that owns the slot table and the compressed memory pool.",
            "size": "The requested device size in bytes, shifted to obtain the number of table slots.",
            "pages": "The number of pages the device covers, used to size the table and bound the initialization loop.",
            "i": "A loop counter that walks every table slot while its lock is initialized.",
            "huge_class_size": "A global size threshold read from the memory pool the first time a device is set up."
        }),
    );
    let funcs = fenced(
        "Each function is traced through the data flow.",
        json!({
            "vzalloc": "Allocates a zeroed virtually contiguous buffer that holds the slot table.",
            "array_size": "Multiplies an element count by an element size with overflow saturation.",
            "zs_create_pool": "Creates the compressed memory pool named after the disk and returns NULL on failure.",
            "vfree": "Releases the slot table buffer without clearing the pointer that still refers to it.",
            "zs_huge_class_size": "Reports the object size above which the pool stores objects uncompressed.",
            "spin_lock_init": "Initializes the spin lock embedded in one table slot."
        }),
    );
    b.reply_if(system_has(SUMMARIZE), &[&summary])
        .reply_if(system_has(DESCRIBE_VARS), &[&vars])
        .reply_if(system_has(DESCRIBE_FUNCS), &[&funcs])
}

const ROOT_CAUSE: &str = "When zs_create_pool fails, vfree releases dev->table but the pointer is not reset, so the teardown path later dereferences and frees the stale table.";

fn vulnerable_verdict() -> String {
    fenced(
        "1. dev->table is allocated by vzalloc.\n2. On pool failure vfree releases it and returns false.\n3. dev->table keeps the stale address, matching the pattern of the example.",
        json!({"result": true, "cot": "dev->table is freed on the error path and left dangling.", "root_cause": ROOT_CAUSE}),
    )
}

fn clean_verdict() -> String {
    fenced(
        "1. After vfree the pointer is reset to NULL.\n2. The teardown check now sees no table.",
        json!({"result": false, "cot": "The pointer is cleared after release, so no stale reference remains.", "root_cause": ""}),
    )
}

fn patch_reply(code: &str, cot: &str) -> String {
    fenced(cot, json!({"cot": cot, "patched_code": code}))
}

fn record(root: &Path, name: &str, backend: ScriptedBackend, kb: &KbStore, model: &RankModel, t: &Target, config: PipelineConfig, expect: Outcome) {
    let dir = root.join("replay").join(name);
    let _ = fs::remove_dir_all(&dir);
    let archive = ReplayArchive::create(&dir).unwrap();
    let gw = Gateway::new(Box::new(RecordingBackend::new(Box::new(backend), archive)), GatewayConfig::default());
    let vocab = Vocabulary::builtin();
    let pipeline = Pipeline { gateway: &gw, kb, model, vocabulary: &vocab, config };
    let run = pipeline.run(CodeArtifact::new(t.code.clone(), t.intent.clone()), None);
    assert_eq!(run.outcome, expect, "{name}: {:?}", run.error);
    fs::create_dir_all(root.join("runs")).unwrap();
    fs::write(root.join("runs").join(format!("{name}.json")), run.to_json()).unwrap();
    println!("{name}: {:?} after {} loops, {} provider calls", run.outcome, run.loop_count, run.usage.len());
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let kb_dir = root.join("kb");
    let _ = fs::remove_dir_all(&kb_dir);
    let mut kb = KbStore::open_or_create(&kb_dir).unwrap();
    let ingest_gw = Gateway::new(Box::new(ScriptedBackend::new(DIM)), GatewayConfig::default());
    let vocab = Vocabulary::builtin();
    let cats = CweCategories::builtin();
    let ctx = IngestContext { gateway: Some(&ingest_gw), vocabulary: &vocab, categories: &cats };
    let ids = kb.ingest_path(&root.join("kb_docs"), &ctx).unwrap();
    println!("ingested {ids:?}");

    let model = RankModel { no_match_threshold: Some(0.5), ..RankModel::default() };
    fs::write(root.join("model.json"), model.to_json()).unwrap();

    let zram = target(&root, "zram_variant");
    let fixed = zram.code.replace("\t\tvfree(dev->table);\n", "\t\tvfree(dev->table);\n\t\tdev->table = NULL;\n");

    // Patched on the first loop.
    let b = zram_profile_rules(ScriptedBackend::new(DIM))
        .reply_when_turn(VERIFY, 1, "dev->table = NULL", &[&clean_verdict()])
        .reply_if(system_has(VERIFY), &[&vulnerable_verdict()])
        .reply_if(system_has(PATCH), &[&patch_reply(&fixed, "Reset dev->table to NULL right after vfree on the error path.")]);
    record(&root, "patched-clean", b, &kb, &model, &zram, PipelineConfig::default(), Outcome::PatchedClean);

    // Three patches that never satisfy the verifier; the first reply is malformed.
    let p1 = zram.code.replace("\tpages = size >> PAGE_SHIFT;\n", "\tpages = size >> PAGE_SHIFT;\n\tif (!pages)\n\t\treturn false;\n");
    let p2 = p1.replace("\t\tvfree(dev->table);\n", "\t\tvfree(dev->table);\n\t\tdev->mem_pool = NULL;\n");
    let p3 = p2.replace("\tfor (i = 0;", "\tdev->disk->private_data = dev;\n\tfor (i = 0;");
    let replies = [
        "I would add a size check before the allocation.".to_string(),
        patch_reply(&p1, "Reject a zero sized device before allocating."),
        patch_reply(&p2, "Clear the pool pointer after the failed creation."),
        patch_reply(&p3, "Attach the device to its disk before initializing locks."),
    ];
    let refs: Vec<&str> = replies.iter().map(String::as_str).collect();
    let b = zram_profile_rules(ScriptedBackend::new(DIM))
        .reply_if(system_has(VERIFY), &[&vulnerable_verdict()])
        .reply_if(system_has(PATCH), &refs);
    let capped = PipelineConfig { max_loops: 3, ..PipelineConfig::default() };
    record(&root, "cap", b, &kb, &model, &zram, capped, Outcome::IterationCapReached);

    // A target unrelated to every entry.
    let checksum = target(&root, "checksum");
    let b = ScriptedBackend::new(DIM)
        .reply_if(system_has(SUMMARIZE), &[&fenced("It folds bytes into an accumulator.", json!({"result": "Folds every byte of a buffer into an accumulator with a shift and add step and returns the accumulated value."}))])
        .reply_if(
            system_has(DESCRIBE_VARS),
            &[&fenced(
                "Each variable is traced.",
                json!({"data": "The bytes being folded.", "len": "How many bytes to fold.", "acc": "The running accumulated value.", "k": "The position of the byte being folded."}),
            )],
        );
    record(&root, "no-match", b, &kb, &model, &checksum, PipelineConfig::default(), Outcome::CleanNoMatch);

    // Golden prompts for the zram entry against the variant.
    let entry = kb.retrieve("CVE-2025-21671").unwrap();
    let mut mapping = SymbolMapping::default();
    for (s, n) in [("variable_1", "dev"), ("variable_2", "size"), ("variable_3", "pages"), ("variable_4", "i")] {
        mapping.variables.insert(s.into(), n.into());
    }
    for (s, n) in [("function_1", "vzalloc"), ("function_2", "vfree"), ("function_3", "zs_create_pool")] {
        mapping.functions.insert(s.into(), n.into());
    }
    let art = CodeArtifact::new(zram.code.clone(), zram.intent.clone());
    let config = GatewayConfig::default();
    let golden = root.join("golden");
    fs::create_dir_all(&golden).unwrap();
    fs::write(golden.join("mapping.json"), serde_json::to_string_pretty(&mapping).unwrap() + "\n").unwrap();
    let v = build_verification_prompt(&config, entry, &mapping, &art).unwrap();
    fs::write(golden.join("verification_prompt.txt"), v.transcript()).unwrap();
    let p = build_patch_prompt(&config, entry, &mapping, &art, ROOT_CAUSE).unwrap();
    fs::write(golden.join("patch_prompt.txt"), p.transcript()).unwrap();
    fs::write(golden.join("root_cause.txt"), ROOT_CAUSE).unwrap();
}
