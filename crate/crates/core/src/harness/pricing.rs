//! Per-token prices and USD totals in exact decimal arithmetic.

use std::collections::BTreeMap;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::CostRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelPrice {
    #[serde(with = "rust_decimal::serde::str")]
    pub input_usd_per_million: Decimal,
    #[serde(with = "rust_decimal::serde::str")]
    pub output_usd_per_million: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("no price configured for model {0:?}")]
    UnknownModel(String),
    #[error("negative price for model {0:?}")]
    NegativePrice(String),
}

/// Prices keyed by model id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PricingTable {
    models: BTreeMap<String, ModelPrice>,
}

const MILLION: Decimal = Decimal::from_parts(1_000_000, 0, 0, false, 0);

impl PricingTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reference serving prices (USD per million tokens).
    pub fn reference() -> Self {
        let mut table = Self::new();
        for (model, input, output) in [
            ("Qwen3-4B", "0.11", "0.42"),
            ("Qwen3-8B", "0.18", "0.70"),
            ("Qwen3-14B", "0.35", "1.40"),
            ("Qwen3-32B", "0.70", "2.80"),
            ("Llama-3.1-8B", "0.10", "0.10"),
            ("DeepSeek-Coder", "0.14", "0.28"),
        ] {
            table
                .insert(model, input.parse().expect("price literal"), output.parse().expect("price literal"))
                .expect("reference prices are non-negative");
        }
        table
    }

    pub fn insert(&mut self, model: &str, input: Decimal, output: Decimal) -> Result<(), PricingError> {
        if input.is_sign_negative() || output.is_sign_negative() {
            return Err(PricingError::NegativePrice(model.to_string()));
        }
        self.models.insert(
            model.to_string(),
            ModelPrice { input_usd_per_million: input, output_usd_per_million: output },
        );
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        match self.models.iter().find(|(_, p)| {
            p.input_usd_per_million.is_sign_negative() || p.output_usd_per_million.is_sign_negative()
        }) {
            Some((model, _)) => Err(PricingError::NegativePrice(model.clone())),
            None => Ok(()),
        }
    }

    pub fn get(&self, model: &str) -> Result<&ModelPrice, PricingError> {
        self.models.get(model).ok_or_else(|| PricingError::UnknownModel(model.to_string()))
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    /// Exact (unrounded) USD for one request.
    pub fn price(&self, model: &str, prompt_tokens: u64, completion_tokens: u64) -> Result<Decimal, PricingError> {
        let p = self.get(model)?;
        Ok((Decimal::from(prompt_tokens) * p.input_usd_per_million
            + Decimal::from(completion_tokens) * p.output_usd_per_million)
            / MILLION)
    }

    /// Sum over records, each re-priced from its token counts.
    pub fn total_cost(&self, records: &[CostRecord]) -> Result<Decimal, PricingError> {
        records.iter().try_fold(Decimal::ZERO, |acc, r| {
            Ok(acc + self.price(&r.model, r.prompt_tokens, r.completion_tokens)?)
        })
    }
}

/// Display rounding: half-even to `dp` places.
pub fn display_usd(value: Decimal, dp: u32) -> String {
    format!("{:.*}", dp as usize, value.round_dp_with_strategy(dp, RoundingStrategy::MidpointNearestEven))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn reference_prices() {
        let t = PricingTable::reference();
        assert_eq!(t.price("Qwen3-4B", 1_000_000, 0).unwrap(), d("0.11"));
        assert_eq!(t.price("Qwen3-32B", 500_000, 500_000).unwrap(), d("1.75"));
        assert_eq!(t.price("Llama-3.1-8B", 1, 1).unwrap(), d("0.0000002"));
        assert_eq!(t.total_cost(&[]).unwrap(), Decimal::ZERO);
        assert_eq!(t.price("gpt", 1, 1), Err(PricingError::UnknownModel("gpt".into())));
    }

    #[test]
    fn negative_prices_rejected() {
        let mut t = PricingTable::new();
        assert!(t.insert("m", d("-1"), d("0")).is_err());
    }

    #[test]
    fn display_is_half_even() {
        assert_eq!(display_usd(d("0.125"), 2), "0.12");
        assert_eq!(display_usd(d("0.135"), 2), "0.14");
        assert_eq!(display_usd(d("2"), 2), "2.00");
    }

    #[test]
    fn table_toml_round_trip() {
        let t = PricingTable::reference();
        let text = toml::to_string(&t).unwrap();
        let back: PricingTable = toml::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
