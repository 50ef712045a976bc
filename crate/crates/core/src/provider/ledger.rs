//! Token and cost accounting.
//!
//! Prices are held as integer micro-currency per million tokens, so a token
//! costs exactly `price` pico-currency and every sum stays an integer.

use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Summarize,
    DescribeVariables,
    DescribeFunctions,
    Verify,
    Patch,
    Embed,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Summarize => "summarize",
            Purpose::DescribeVariables => "describe-variables",
            Purpose::DescribeFunctions => "describe-functions",
            Purpose::Verify => "verify",
            Purpose::Patch => "patch",
            Purpose::Embed => "embed",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Unit prices in micro-currency per million tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Price {
    pub input_micro_per_mtok: u64,
    pub output_micro_per_mtok: u64,
}

impl Price {
    /// From currency per million tokens, e.g. `2.50`.
    pub fn per_million(input: f64, output: f64) -> Self {
        Price {
            input_micro_per_mtok: (input * 1e6).round() as u64,
            output_micro_per_mtok: (output * 1e6).round() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriceTable {
    pub models: BTreeMap<String, Price>,
}

impl Default for PriceTable {
    /// List prices of the default chat and embedding models; unknown models are free.
    fn default() -> Self {
        let models = [("gpt-4o", Price::per_million(2.5, 10.0)), ("text-embedding-3-small", Price::per_million(0.02, 0.0))];
        PriceTable { models: models.into_iter().map(|(m, p)| (m.to_string(), p)).collect() }
    }
}

impl PriceTable {
    pub fn get(&self, model: &str) -> Price {
        self.models.get(model).copied().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageRecord {
    pub purpose: Purpose,
    pub model: String,
    /// Content digest of the request; the key into a replay archive.
    pub digest: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub price: Price,
    /// `prompt_tokens * price_in + completion_tokens * price_out`, in pico-currency.
    pub cost_pico: u128,
}

impl UsageRecord {
    pub fn new(purpose: Purpose, model: &str, digest: &str, usage: Usage, price: Price) -> Self {
        let cost_pico = usage.prompt_tokens as u128 * price.input_micro_per_mtok as u128
            + usage.completion_tokens as u128 * price.output_micro_per_mtok as u128;
        UsageRecord {
            purpose,
            model: model.to_string(),
            digest: digest.to_string(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            price,
            cost_pico,
        }
    }

    pub fn cost(&self) -> f64 {
        self.cost_pico as f64 / 1e12
    }
}

#[derive(Debug, Default)]
pub struct UsageLedger {
    records: Mutex<Vec<UsageRecord>>,
}

impl UsageLedger {
    pub fn append(&self, record: UsageRecord) {
        self.records.lock().expect("ledger lock").push(record);
    }

    pub fn len(&self) -> usize {
        self.records.lock().expect("ledger lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> Vec<UsageRecord> {
        self.records.lock().expect("ledger lock").clone()
    }

    /// Records appended at or after position `from`.
    pub fn since(&self, from: usize) -> Vec<UsageRecord> {
        let recs = self.records.lock().expect("ledger lock");
        recs.get(from..).map(|s| s.to_vec()).unwrap_or_default()
    }

    pub fn total_pico(&self) -> u128 {
        self.records.lock().expect("ledger lock").iter().map(|r| r.cost_pico).sum()
    }

    pub fn count(&self, purpose: Purpose) -> usize {
        self.records.lock().expect("ledger lock").iter().filter(|r| r.purpose == purpose).count()
    }
}

/// Aggregate of a ledger slice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageSummary {
    pub calls: BTreeMap<Purpose, usize>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub cost_pico: u128,
}

impl UsageSummary {
    pub fn of(records: &[UsageRecord]) -> Self {
        let mut s = UsageSummary::default();
        for r in records {
            *s.calls.entry(r.purpose).or_default() += 1;
            s.prompt_tokens += r.prompt_tokens;
            s.completion_tokens += r.completion_tokens;
            s.cost_pico += r.cost_pico;
        }
        s
    }
}
