//! Generated corpora and the hand-built `micro_k002` fixture.
//!
//! Synthetic documents consist of pseudo-word units with a random argument
//! tree. Their discourse dependencies copy the argument arcs except for a
//! controlled fraction of reattached units, and relation labels follow the
//! argumentative function of agreeing arcs.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    parse_arggraph_xml, simplify_functions, ArgumentFunction, ArgumentTree, Document, Language,
    UnitKind, Variant, VariantGroup,
};
use crate::rst::{
    to_dependencies, Direction, Nuclearity, RstDependencies, RstNode, RstRelation, SPAN,
};
use crate::tree;

const SYLLABLES: [&str; 24] = [
    "ka", "lo", "mi", "ter", "su", "ban", "ri", "del", "po", "nex", "va", "gor", "te", "lin", "ru",
    "sam", "chi", "dov", "e", "ul", "fa", "quo", "zen", "hi",
];

const SUPPORT_RELATIONS: [&str; 4] = ["Elaborate", "Explanation", "Cause", "Background"];
const ATTACK_RELATIONS: [&str; 2] = ["Contrast", "Comparison"];
const NOISE_RELATIONS: [&str; 3] = ["Joint", "Temporal", "Same-Unit"];

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub docs: usize,
    pub min_units: usize,
    pub max_units: usize,
    /// Share of non-root arcs whose discourse head equals the argument head.
    pub rst_agreement: f64,
    /// Probability that a non-root arc is an attack.
    pub attack_rate: f64,
    pub paraphrases: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            docs: 60,
            min_units: 3,
            max_units: 7,
            rst_agreement: 0.8,
            attack_rate: 0.3,
            paraphrases: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub groups: Vec<VariantGroup>,
    /// Discourse dependencies over the units of every document (originals
    /// and paraphrases), keyed by document id.
    pub rst: BTreeMap<String, RstDependencies>,
}

impl SyntheticCorpus {
    /// Fraction of non-root arcs over the originals whose discourse head
    /// equals the argument head.
    pub fn measured_agreement(&self) -> f64 {
        let (mut same, mut total) = (0usize, 0usize);
        for g in &self.groups {
            let deps = &self.rst[&g.original.id];
            for (i, &h) in g.tree.heads.iter().enumerate() {
                if h != 0 {
                    total += 1;
                    same += usize::from(deps.heads[i] == h);
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            same as f64 / total as f64
        }
    }
}

fn word<R: Rng>(rng: &mut R) -> String {
    let parts = rng.random_range(1..=3);
    (0..parts)
        .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
        .collect()
}

fn sentence<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(4..=9);
    let mut s = (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ");
    s.push('.');
    s
}

/// Rewrites roughly a third of the words of `text`.
fn paraphrase<R: Rng>(text: &str, rng: &mut R) -> String {
    let body = text.trim_end_matches('.');
    let mut words: Vec<String> = body.split(' ').map(str::to_string).collect();
    for w in words.iter_mut() {
        if rng.random_bool(0.35) {
            *w = word(rng);
        }
    }
    format!("{}.", words.join(" "))
}

/// Random recursive tree over `n` units with the central claim at a random
/// position; non-root arcs are attacks with probability `attack_rate`.
pub fn random_tree<R: Rng>(id: &str, n: usize, attack_rate: f64, rng: &mut R) -> ArgumentTree {
    let mut perm: Vec<usize> = (1..=n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    let mut heads = vec![0; n];
    let mut functions = vec![ArgumentFunction::Cc; n];
    for k in 1..n {
        let unit = perm[k];
        heads[unit - 1] = perm[rng.random_range(0..k)];
        functions[unit - 1] = if rng.random_bool(attack_rate) {
            ArgumentFunction::Attack
        } else {
            ArgumentFunction::Support
        };
    }
    ArgumentTree::new(id, heads, functions).expect("generated tree is valid")
}

fn in_subtree(heads: &[usize], node: usize, root: usize) -> bool {
    let mut v = node;
    while v != 0 {
        if v == root {
            return true;
        }
        v = heads[v - 1];
    }
    false
}

fn relation<R: Rng>(f: ArgumentFunction, rng: &mut R) -> &'static str {
    match f {
        ArgumentFunction::Attack => ATTACK_RELATIONS[rng.random_range(0..ATTACK_RELATIONS.len())],
        _ => SUPPORT_RELATIONS[rng.random_range(0..SUPPORT_RELATIONS.len())],
    }
}

fn satellite(label: &str) -> Option<RstRelation> {
    Some(RstRelation {
        label: label.to_string(),
        direction: Direction::Forward,
        dependent: Nuclearity::Satellite,
    })
}

/// Discourse dependencies for a set of trees: every non-root arc is copied
/// except `round((1 - agreement) * arcs)` of them, chosen uniformly over the
/// corpus and reattached to a different legal head. Arcs with no legal
/// alternative are passed over in favour of the next candidate.
fn discourse_dependencies<R: Rng>(
    trees: &[ArgumentTree],
    agreement: f64,
    rng: &mut R,
) -> Vec<RstDependencies> {
    let mut deps: Vec<RstDependencies> = trees
        .iter()
        .map(|t| RstDependencies {
            heads: t.heads.clone(),
            relations: t
                .heads
                .iter()
                .zip(&t.functions)
                .map(|(&h, &f)| {
                    if h == 0 {
                        None
                    } else {
                        satellite(relation(f, rng))
                    }
                })
                .collect(),
        })
        .collect();
    let mut arcs: Vec<(usize, usize)> = Vec::new();
    for (d, t) in trees.iter().enumerate() {
        arcs.extend(
            t.heads
                .iter()
                .enumerate()
                .filter(|(_, &h)| h != 0)
                .map(|(i, _)| (d, i)),
        );
    }
    let mut flips = ((1.0 - agreement) * arcs.len() as f64).round() as usize;
    let order = sample(rng, arcs.len(), arcs.len());
    for k in order {
        if flips == 0 {
            break;
        }
        let (d, i) = arcs[k];
        let heads = &deps[d].heads;
        let options: Vec<usize> = (1..=heads.len())
            .filter(|&c| c != heads[i] && !in_subtree(heads, c, i + 1))
            .collect();
        if options.is_empty() {
            continue;
        }
        deps[d].heads[i] = options[rng.random_range(0..options.len())];
        deps[d].relations[i] =
            satellite(NOISE_RELATIONS[rng.random_range(0..NOISE_RELATIONS.len())]);
        flips -= 1;
    }
    debug_assert!(deps.iter().all(|d| tree::validate_heads(&d.heads).is_ok()));
    deps
}

pub fn generate(cfg: &SynthConfig) -> SyntheticCorpus {
    assert!(
        cfg.min_units >= 1 && cfg.min_units <= cfg.max_units,
        "unit range"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut docs = Vec::with_capacity(cfg.docs);
    for d in 0..cfg.docs {
        let id = format!("synth_{d:03}");
        let n = rng.random_range(cfg.min_units..=cfg.max_units);
        let texts: Vec<(String, String)> = (1..=n)
            .map(|u| (format!("a{u}"), sentence(&mut rng)))
            .collect();
        let doc = Document::from_texts(&id, Language::En, UnitKind::Adu, &texts);
        let tree = random_tree(&id, n, cfg.attack_rate, &mut rng);
        docs.push((doc, tree));
    }
    let trees: Vec<ArgumentTree> = docs.iter().map(|(_, t)| t.clone()).collect();
    let deps = discourse_dependencies(&trees, cfg.rst_agreement, &mut rng);
    let mut rst = BTreeMap::new();
    let mut groups = Vec::with_capacity(docs.len());
    for ((doc, tree), dep) in docs.into_iter().zip(deps) {
        let mut variants = Vec::new();
        if cfg.paraphrases {
            let texts: Vec<(String, String)> = doc
                .units
                .iter()
                .map(|u| (u.id.clone(), paraphrase(&u.text, &mut rng)))
                .collect();
            let mut p =
                Document::from_texts(format!("{}_p", doc.id), Language::En, UnitKind::Adu, &texts);
            p.variant = Variant::BackTranslated;
            p.source_doc_id = Some(doc.id.clone());
            rst.insert(p.id.clone(), dep.clone());
            variants.push(p);
        }
        rst.insert(doc.id.clone(), dep);
        groups.push(VariantGroup {
            original: doc,
            variants,
            tree,
        });
    }
    SyntheticCorpus { groups, rst }
}

/// The ten-document corpus used for the capacity check.
pub fn overfit_corpus(seed: u64) -> SyntheticCorpus {
    generate(&SynthConfig {
        docs: 10,
        min_units: 3,
        max_units: 6,
        seed,
        ..SynthConfig::default()
    })
}

pub const MICRO_K002_XML: &str = r#"<?xml version='1.0' encoding='UTF-8'?>
<arggraph id="micro_k002" lang="en">
  <edu id="e1"><![CDATA[Actually it would be justified if all German universities charged tuition fees.]]></edu>
  <edu id="e2"><![CDATA[As long as it is ensured that the funds really benefit the universities directly, one can continue to regard this as social justice.]]></edu>
  <edu id="e3"><![CDATA[Those who study later decide this early on, anyway.]]></edu>
  <edu id="e4"><![CDATA[It's always possible to take out a student loan or to earn a scholarship.]]></edu>
  <edu id="e5"><![CDATA[To oblige non-academics to finance others' degrees through taxes, however, is not just.]]></edu>
  <adu id="a1" type="pro"/>
  <adu id="a2" type="pro"/>
  <adu id="a3" type="pro"/>
  <adu id="a4" type="pro"/>
  <adu id="a5" type="pro"/>
  <edge id="c6" src="e1" trg="a1" type="seg"/>
  <edge id="c7" src="e2" trg="a2" type="seg"/>
  <edge id="c8" src="e3" trg="a3" type="seg"/>
  <edge id="c9" src="e4" trg="a4" type="seg"/>
  <edge id="c10" src="e5" trg="a5" type="seg"/>
  <edge id="c1" src="a2" trg="a1" type="sup"/>
  <edge id="c2" src="a3" trg="a1" type="sup"/>
  <edge id="c3" src="a4" trg="a1" type="sup"/>
  <edge id="c4" src="a5" trg="a1" type="sup"/>
</arggraph>
"#;

/// Intra-ADU split points of the English text: (ADU index, text that
/// starts the second EDU).
const K002_SPLITS: [(usize, &str); 3] = [(0, "if all"), (1, "one can"), (3, "or to earn")];

#[derive(Debug, Clone)]
pub struct MicroFixture {
    pub document: Document,
    pub tree: ArgumentTree,
    /// EDU-level discourse tree over the same text (8 leaves).
    pub rst: RstNode,
}

impl MicroFixture {
    pub fn edu_dependencies(&self) -> RstDependencies {
        to_dependencies(&self.rst)
    }

    pub fn adu_spans(&self) -> Vec<(usize, usize)> {
        self.document.units.iter().map(|u| u.span).collect()
    }
}

/// `micro_k002` with a hand-built 8-EDU discourse tree: ADUs 1, 2 and 4
/// hold two EDUs each; ADU 1 is the top nucleus.
pub fn micro_k002() -> MicroFixture {
    let (document, raw) = parse_arggraph_xml(MICRO_K002_XML).expect("fixture parses");
    let tree = simplify_functions(&raw).expect("fixture simplifies");
    let text = document.text();
    let mut cuts: Vec<usize> = document.units.iter().map(|u| u.span.0).collect();
    for (adu, marker) in K002_SPLITS {
        let unit = &document.units[adu];
        let local = unit.text.find(marker).expect("split marker present");
        cuts.push(unit.span.0 + unit.text[..local].chars().count());
    }
    cuts.sort_unstable();
    cuts.push(text.chars().count());
    let leaf = |i: usize| RstNode::leaf(cuts[i], cuts[i + 1]);
    use Nuclearity::*;
    let adu1 = RstNode::internal(vec![
        (leaf(0), Nucleus, SPAN),
        (leaf(1), Satellite, "Condition"),
    ]);
    let adu2 = RstNode::internal(vec![
        (leaf(2), Satellite, "Condition"),
        (leaf(3), Nucleus, SPAN),
    ]);
    let adu4 = RstNode::internal(vec![
        (leaf(5), Nucleus, "Joint"),
        (leaf(6), Nucleus, "Joint"),
    ]);
    let reasons = RstNode::internal(vec![
        (adu2, Nucleus, "Joint"),
        (leaf(4), Nucleus, "Joint"),
        (adu4, Nucleus, "Joint"),
        (leaf(7), Nucleus, "Joint"),
    ]);
    let rst = RstNode::internal(vec![
        (adu1, Nucleus, SPAN),
        (reasons, Satellite, "Explanation"),
    ]);
    MicroFixture {
        document,
        tree,
        rst,
    }
}
