//! Cross-column association rules over the themed evidence table.
//!
//! Each evidence row becomes a transaction of `(attribute, theme)` items.
//! Frequent itemsets come from level-wise Apriori and rules are every
//! bipartition of a frequent itemset whose two sides share no attribute.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::exec::Exec;
use crate::extraction::EvidenceTable;
use crate::synthesis::{SegmentRef, ThemeSet};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Item {
    pub attribute: String,
    pub theme: String,
}

impl Item {
    pub fn new(attribute: impl Into<String>, theme: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            theme: theme.into(),
        }
    }
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.attribute, self.theme)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub doc_id: String,
    pub items: BTreeSet<Item>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemset {
    pub items: Vec<Item>,
    pub count: usize,
    pub support: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssociationRule {
    pub antecedent: Vec<Item>,
    pub consequent: Vec<Item>,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest: String,
    pub protocol_hash: String,
    pub rng_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeModel {
    pub themes: ThemeSet,
    pub rules: Vec<AssociationRule>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("min_support {0} is outside (0, 1]")]
    MinSupport(f64),
    #[error("no transactions to mine")]
    NoTransactions,
    #[error("rule item {0} names no theme")]
    DanglingTheme(String),
    #[error("duplicate rule {0}")]
    DuplicateRule(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// One transaction per table row holding every theme that contains one of
/// the row's segments.
pub fn build_transactions(table: &EvidenceTable, themes: &ThemeSet) -> Vec<Transaction> {
    let mut owner: HashMap<(&str, &SegmentRef), Vec<&str>> = HashMap::new();
    for column in &themes.columns {
        for theme in &column.themes {
            for r in &theme.member_refs {
                owner
                    .entry((column.attribute.as_str(), r))
                    .or_default()
                    .push(theme.label.as_str());
            }
        }
    }
    table
        .rows
        .iter()
        .map(|row| {
            let mut items = BTreeSet::new();
            for cell in &row.cells {
                for s in &cell.segments {
                    let key = SegmentRef::of(s);
                    if let Some(labels) = owner.get(&(cell.attribute.as_str(), &key)) {
                        for label in labels {
                            items.insert(Item::new(&cell.attribute, *label));
                        }
                    }
                }
            }
            Transaction {
                doc_id: row.doc_id.clone(),
                items,
            }
        })
        .collect()
}

fn is_frequent(count: usize, n: usize, min_support: f64) -> bool {
    count as f64 / n as f64 >= min_support
}

/// Level-wise Apriori. Itemsets come back sorted lexicographically.
pub fn mine_frequent_itemsets(
    transactions: &[Transaction],
    min_support: f64,
    max_itemset_size: usize,
    exec: Exec,
) -> Result<Vec<FrequentItemset>, RuleError> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(RuleError::MinSupport(min_support));
    }
    if transactions.is_empty() {
        return Err(RuleError::NoTransactions);
    }
    let n = transactions.len();
    let mut singles: BTreeMap<&Item, usize> = BTreeMap::new();
    for t in transactions {
        for item in &t.items {
            *singles.entry(item).or_insert(0) += 1;
        }
    }
    let mut level: Vec<(Vec<Item>, usize)> = singles
        .into_iter()
        .filter(|&(_, c)| is_frequent(c, n, min_support))
        .map(|(i, c)| (vec![i.clone()], c))
        .collect();
    let mut out = Vec::new();
    let mut size = 1;
    while !level.is_empty() {
        out.extend(level.iter().map(|(items, count)| FrequentItemset {
            items: items.clone(),
            count: *count,
            support: *count as f64 / n as f64,
        }));
        if size >= max_itemset_size {
            break;
        }
        let candidates = join_and_prune(&level);
        let counts = exec.map(&candidates, |c| {
            transactions
                .iter()
                .filter(|t| c.iter().all(|i| t.items.contains(i)))
                .count()
        });
        level = candidates
            .into_iter()
            .zip(counts)
            .filter(|&(_, c)| is_frequent(c, n, min_support))
            .collect();
        size += 1;
    }
    out.sort_by(|a, b| a.items.cmp(&b.items));
    Ok(out)
}

/// Joins sorted frequent itemsets sharing all but their last item and drops
/// candidates with an infrequent subset.
fn join_and_prune(level: &[(Vec<Item>, usize)]) -> Vec<Vec<Item>> {
    let known: BTreeSet<&[Item]> = level.iter().map(|(s, _)| s.as_slice()).collect();
    let mut out = Vec::new();
    for (i, (a, _)) in level.iter().enumerate() {
        for (b, _) in &level[i + 1..] {
            let k = a.len();
            if a[..k - 1] != b[..k - 1] {
                continue;
            }
            let mut candidate = a.clone();
            candidate.push(b[k - 1].clone());
            candidate.sort();
            let all_subsets_frequent = (0..candidate.len()).all(|skip| {
                let sub: Vec<Item> = candidate
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != skip)
                    .map(|(_, x)| x.clone())
                    .collect();
                known.contains(sub.as_slice())
            });
            if all_subsets_frequent {
                out.push(candidate);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Every bipartition of every frequent itemset of size >= 2 whose sides
/// share no attribute and whose confidence reaches `min_confidence`.
pub fn generate_rules(frequent: &[FrequentItemset], min_confidence: f64) -> Vec<AssociationRule> {
    let support: BTreeMap<&[Item], f64> = frequent
        .iter()
        .map(|f| (f.items.as_slice(), f.support))
        .collect();
    let mut rules = Vec::new();
    for f in frequent.iter().filter(|f| f.items.len() >= 2) {
        let n = f.items.len();
        for mask in 1..(1u64 << n) - 1 {
            let (mut ante, mut cons) = (Vec::new(), Vec::new());
            for (j, item) in f.items.iter().enumerate() {
                if mask & (1 << j) != 0 {
                    ante.push(item.clone());
                } else {
                    cons.push(item.clone());
                }
            }
            let ante_attrs: BTreeSet<&str> = ante.iter().map(|i| i.attribute.as_str()).collect();
            if cons.iter().any(|i| ante_attrs.contains(i.attribute.as_str())) {
                continue;
            }
            let (Some(&sa), Some(&sc)) = (support.get(ante.as_slice()), support.get(cons.as_slice())) else {
                continue;
            };
            let confidence = f.support / sa;
            if confidence >= min_confidence {
                rules.push(AssociationRule {
                    antecedent: ante,
                    consequent: cons,
                    support: f.support,
                    confidence,
                    lift: confidence / sc,
                });
            }
        }
    }
    sort_rules(&mut rules);
    rules
}

/// Lift descending, support descending, then confidence descending and the
/// item lists ascending.
pub fn sort_rules(rules: &mut [AssociationRule]) {
    rules.sort_by(|a, b| {
        b.lift
            .total_cmp(&a.lift)
            .then_with(|| b.support.total_cmp(&a.support))
            .then_with(|| b.confidence.total_cmp(&a.confidence))
            .then_with(|| a.antecedent.cmp(&b.antecedent))
            .then_with(|| a.consequent.cmp(&b.consequent))
    });
}

fn join_items(items: &[Item]) -> String {
    items.iter().map(Item::to_string).collect::<Vec<_>>().join(" & ")
}

impl AssociationRule {
    pub fn describe(&self) -> String {
        format!("{} => {}", join_items(&self.antecedent), join_items(&self.consequent))
    }

    pub fn items(&self) -> impl Iterator<Item = &Item> {
        self.antecedent.iter().chain(&self.consequent)
    }
}

pub fn assemble_model(
    themes: ThemeSet,
    mut rules: Vec<AssociationRule>,
    provenance: Provenance,
) -> Result<KnowledgeModel, RuleError> {
    for item in rules.iter().flat_map(|r| r.items()) {
        if themes.theme(&item.attribute, &item.theme).is_none() {
            return Err(RuleError::DanglingTheme(item.to_string()));
        }
    }
    sort_rules(&mut rules);
    let mut seen = BTreeSet::new();
    for r in &rules {
        if !seen.insert((&r.antecedent, &r.consequent)) {
            return Err(RuleError::DuplicateRule(r.describe()));
        }
    }
    Ok(KnowledgeModel {
        themes,
        rules,
        provenance,
    })
}

impl KnowledgeModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// `antecedent, consequent, support, confidence, lift`.
    pub fn rules_csv(&self) -> Result<String, RuleError> {
        let err = |e: csv::Error| RuleError::Csv(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["antecedent", "consequent", "support", "confidence", "lift"])
            .map_err(err)?;
        for r in &self.rules {
            w.write_record([
                join_items(&r.antecedent),
                join_items(&r.consequent),
                r.support.to_string(),
                r.confidence.to_string(),
                r.lift.to_string(),
            ])
            .map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| RuleError::Csv(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Graphviz digraph: one node per theme, one edge per antecedent and
    /// consequent item pair of each rule, weighted by lift.
    pub fn to_dot(&self) -> String {
        let quote = |s: &str| format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""));
        let mut out = String::from("digraph knowledge_model {\n  rankdir=LR;\n");
        for column in &self.themes.columns {
            for t in &column.themes {
                let id = Item::new(&column.attribute, &t.label).to_string();
                out.push_str(&format!(
                    "  {} [label={}, members={}];\n",
                    quote(&id),
                    quote(&format!("{}\\n{}", column.attribute, t.label)),
                    t.member_refs.len()
                ));
            }
        }
        for (n, r) in self.rules.iter().enumerate() {
            for a in &r.antecedent {
                for c in &r.consequent {
                    out.push_str(&format!(
                        "  {} -> {} [weight={}, label={}, rule={}];\n",
                        quote(&a.to_string()),
                        quote(&c.to_string()),
                        r.lift,
                        quote(&format!("{:.2}", r.lift)),
                        n + 1
                    ));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
