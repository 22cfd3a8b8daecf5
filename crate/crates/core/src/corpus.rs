//! WordNet noun database ingestion, meronymy pair extraction and Basic Level
//! Concepts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dangling pointers: {}", .0.join(", "))]
    Dangling(Vec<String>),
    #[error("holonym pointers without matching meronym pointer: {}", .0.join(", "))]
    Inverse(Vec<String>),
    #[error("hypernym cycle through {0}")]
    Cycle(String),
    #[error("unknown synset `{0}`")]
    UnknownSynset(String),
    #[error("unknown meronymy relation `{0}`")]
    UnknownRelation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SynsetId {
    pub pos: char,
    pub offset: u32,
}

impl SynsetId {
    pub fn noun(offset: u32) -> Self {
        SynsetId { pos: 'n', offset }
    }
}

impl fmt::Display for SynsetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:08}-{}", self.offset, self.pos)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WnRelation {
    Part,
    Member,
    Substance,
}

impl WnRelation {
    pub const ALL: [WnRelation; 3] = [WnRelation::Substance, WnRelation::Member, WnRelation::Part];

    fn from_code(c: char) -> Option<Self> {
        match c {
            'p' => Some(WnRelation::Part),
            'm' => Some(WnRelation::Member),
            's' => Some(WnRelation::Substance),
            _ => None,
        }
    }

    pub fn code(self) -> char {
        match self {
            WnRelation::Part => 'p',
            WnRelation::Member => 'm',
            WnRelation::Substance => 's',
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            WnRelation::Part => "part",
            WnRelation::Member => "member",
            WnRelation::Substance => "substance",
        }
    }
}

impl fmt::Display for WnRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WnRelation {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "part" => Ok(WnRelation::Part),
            "member" => Ok(WnRelation::Member),
            "substance" => Ok(WnRelation::Substance),
            other => Err(CorpusError::UnknownRelation(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Synset {
    pub id: SynsetId,
    /// Lemmas with their sense numbers.
    pub lemmas: Vec<(String, u32)>,
    pub gloss: String,
    /// Includes instance hypernyms.
    pub hypernyms: Vec<SynsetId>,
    pub meronyms: BTreeMap<WnRelation, Vec<SynsetId>>,
    pub holonyms: BTreeMap<WnRelation, Vec<SynsetId>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeronymyPair {
    pub relation: WnRelation,
    pub part: SynsetId,
    pub whole: SynsetId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlcAssignment {
    pub synset: SynsetId,
    pub blc: SynsetId,
    pub descendant_count: usize,
}

/// Immutable, fully resolved noun graph.
#[derive(Debug, Clone, Default)]
pub struct SynsetGraph {
    synsets: BTreeMap<SynsetId, Synset>,
    hyponyms: BTreeMap<SynsetId, Vec<SynsetId>>,
    names: HashMap<String, SynsetId>,
}

struct RawPointer {
    symbol: String,
    target: SynsetId,
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, message: message.into() }
}

fn normalize_lemma(word: &str) -> String {
    let w = word.split('(').next().unwrap_or(word);
    w.to_lowercase()
}

fn parse_data_line(n: usize, line: &str) -> Result<(Synset, Vec<RawPointer>), CorpusError> {
    let (body, gloss) = match line.split_once(" | ") {
        Some((b, g)) => (b, g.trim().to_string()),
        None => (line.trim_end_matches(" |").trim_end_matches('|'), String::new()),
    };
    let toks: Vec<&str> = body.split_whitespace().collect();
    let mut it = toks.iter().copied();
    let mut next = |what: &str| it.next().ok_or_else(|| parse_err(n, format!("missing {what}")));
    let offset_s = next("offset")?;
    if offset_s.len() != 8 {
        return Err(parse_err(n, format!("offset `{offset_s}` is not 8 digits")));
    }
    let offset: u32 = offset_s.parse().map_err(|_| parse_err(n, format!("bad offset `{offset_s}`")))?;
    let _lex_filenum = next("lex_filenum")?;
    let ss_type = next("ss_type")?;
    if ss_type != "n" {
        return Err(parse_err(n, format!("unsupported synset type `{ss_type}`")));
    }
    let w_cnt = u32::from_str_radix(next("w_cnt")?, 16).map_err(|_| parse_err(n, "bad word count"))?;
    let mut words = Vec::new();
    for _ in 0..w_cnt {
        let w = next("word")?;
        next("lex_id")?;
        words.push(normalize_lemma(w));
    }
    let p_cnt: usize = next("p_cnt")?.parse().map_err(|_| parse_err(n, "bad pointer count"))?;
    let mut ptrs = Vec::new();
    for _ in 0..p_cnt {
        let symbol = next("pointer symbol")?.to_string();
        let t = next("pointer offset")?;
        let target_off: u32 = t.parse().map_err(|_| parse_err(n, format!("bad pointer offset `{t}`")))?;
        let pos = next("pointer pos")?;
        let st = next("source/target")?;
        if st.len() != 4 || u16::from_str_radix(st, 16).is_err() {
            return Err(parse_err(n, format!("bad source/target field `{st}`")));
        }
        if pos == "n" {
            ptrs.push(RawPointer { symbol, target: SynsetId::noun(target_off) });
        }
    }
    let id = SynsetId::noun(offset);
    let syn = Synset {
        id,
        lemmas: words.into_iter().map(|w| (w, 0)).collect(),
        gloss,
        hypernyms: Vec::new(),
        meronyms: BTreeMap::new(),
        holonyms: BTreeMap::new(),
    };
    Ok((syn, ptrs))
}

/// `lemma -> offsets in sense order` from an index file.
fn parse_index(src: &str) -> Result<HashMap<String, Vec<u32>>, CorpusError> {
    let mut out = HashMap::new();
    for (i, line) in src.lines().enumerate() {
        if line.starts_with("  ") || line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = || parse_err(i + 1, "malformed index line");
        if toks.len() < 6 {
            return Err(bad());
        }
        let p_cnt: usize = toks[3].parse().map_err(|_| bad())?;
        let start = 4 + p_cnt + 2;
        if toks.len() < start {
            return Err(bad());
        }
        let offs = toks[start..].iter().map(|t| t.parse::<u32>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?;
        out.insert(toks[0].to_lowercase(), offs);
    }
    Ok(out)
}

/// Reads a `data.noun` stream and, optionally, the matching `index.noun`
/// for sense numbers. Without an index, senses follow offset order.
pub fn parse_database(data: &str, index: Option<&str>) -> Result<SynsetGraph, CorpusError> {
    let mut synsets = BTreeMap::new();
    let mut raw: Vec<(SynsetId, Vec<RawPointer>)> = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.starts_with("  ") || line.trim().is_empty() {
            continue;
        }
        let (syn, ptrs) = parse_data_line(i + 1, line)?;
        if synsets.contains_key(&syn.id) {
            return Err(parse_err(i + 1, format!("duplicate offset {}", syn.id)));
        }
        raw.push((syn.id, ptrs));
        synsets.insert(syn.id, syn);
    }

    let mut dangling = Vec::new();
    for (src, ptrs) in &raw {
        for p in ptrs {
            if !synsets.contains_key(&p.target) {
                dangling.push(format!("{src} {} {}", p.symbol, p.target));
            }
        }
    }
    if !dangling.is_empty() {
        return Err(CorpusError::Dangling(dangling));
    }

    for (src, ptrs) in raw {
        let s = synsets.get_mut(&src).expect("inserted above");
        for p in ptrs {
            let mut chars = p.symbol.chars();
            match (chars.next(), chars.next(), chars.next()) {
                (Some('@'), None, _) | (Some('@'), Some('i'), None) => {
                    if p.target == src {
                        return Err(CorpusError::Cycle(src.to_string()));
                    }
                    if !s.hypernyms.contains(&p.target) {
                        s.hypernyms.push(p.target);
                    }
                }
                (Some('%'), Some(c), None) => {
                    if let Some(r) = WnRelation::from_code(c) {
                        s.meronyms.entry(r).or_default().push(p.target);
                    }
                }
                (Some('#'), Some(c), None) => {
                    if let Some(r) = WnRelation::from_code(c) {
                        s.holonyms.entry(r).or_default().push(p.target);
                    }
                }
                _ => {}
            }
        }
        s.hypernyms.sort();
    }

    let mut inverse = Vec::new();
    for s in synsets.values() {
        for (r, ts) in &s.holonyms {
            for t in ts {
                let ok = synsets[t].meronyms.get(r).is_some_and(|ms| ms.contains(&s.id));
                if !ok {
                    inverse.push(format!("{} #{} {}", s.id, r.code(), t));
                }
            }
        }
    }
    if !inverse.is_empty() {
        return Err(CorpusError::Inverse(inverse));
    }

    // sense numbers
    let index = index.map(parse_index).transpose()?;
    let mut by_lemma: HashMap<String, Vec<u32>> = HashMap::new();
    for s in synsets.values() {
        for (w, _) in &s.lemmas {
            by_lemma.entry(w.clone()).or_default().push(s.id.offset);
        }
    }
    for s in synsets.values_mut() {
        let off = s.id.offset;
        for (w, k) in s.lemmas.iter_mut() {
            let from_index = index.as_ref().and_then(|ix| ix.get(w.as_str())).and_then(|offs| offs.iter().position(|&o| o == off));
            let pos = from_index.unwrap_or_else(|| by_lemma[w.as_str()].iter().position(|&o| o == off).unwrap_or(0));
            *k = pos as u32 + 1;
        }
    }

    let mut hyponyms: BTreeMap<SynsetId, Vec<SynsetId>> = BTreeMap::new();
    for s in synsets.values() {
        for h in &s.hypernyms {
            hyponyms.entry(*h).or_default().push(s.id);
        }
    }
    let mut names = HashMap::new();
    for s in synsets.values() {
        for (w, k) in &s.lemmas {
            names.insert(format!("{w}#{k}:n"), s.id);
        }
    }
    let g = SynsetGraph { synsets, hyponyms, names };
    g.check_acyclic()?;
    Ok(g)
}

impl SynsetGraph {
    pub fn len(&self) -> usize {
        self.synsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synsets.is_empty()
    }

    pub fn synsets(&self) -> impl Iterator<Item = &Synset> {
        self.synsets.values()
    }

    pub fn get(&self, id: SynsetId) -> Result<&Synset, CorpusError> {
        self.synsets.get(&id).ok_or_else(|| CorpusError::UnknownSynset(id.to_string()))
    }

    /// External rendering `lemma#k:n` from the first lemma.
    pub fn name(&self, id: SynsetId) -> String {
        match self.synsets.get(&id).and_then(|s| s.lemmas.first()) {
            Some((w, k)) => format!("{w}#{k}:n"),
            None => id.to_string(),
        }
    }

    /// Accepts `lemma#k:n` for any lemma of the synset, or `00001740-n`.
    pub fn resolve(&self, name: &str) -> Result<SynsetId, CorpusError> {
        if let Some(id) = self.names.get(name) {
            return Ok(*id);
        }
        if let Some(off) = name.strip_suffix("-n").and_then(|o| o.parse::<u32>().ok()) {
            let id = SynsetId::noun(off);
            if self.synsets.contains_key(&id) {
                return Ok(id);
            }
        }
        Err(CorpusError::UnknownSynset(name.to_string()))
    }

    pub fn pair_text(&self, p: &MeronymyPair) -> String {
        format!("({}, {}, {})", p.relation, self.name(p.part), self.name(p.whole))
    }

    pub fn direct_hyponyms(&self, id: SynsetId) -> &[SynsetId] {
        self.hyponyms.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Strict descendants along hyponym edges.
    pub fn hyponym_closure(&self, id: SynsetId) -> BTreeSet<SynsetId> {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<SynsetId> = self.direct_hyponyms(id).to_vec();
        while let Some(x) = stack.pop() {
            if seen.insert(x) {
                stack.extend_from_slice(self.direct_hyponyms(x));
            }
        }
        seen
    }

    /// True iff `ancestor` is reachable from `s` by one or more hypernym edges.
    pub fn is_hyponym_of(&self, s: SynsetId, ancestor: SynsetId) -> Result<bool, CorpusError> {
        self.get(s)?;
        self.get(ancestor)?;
        let mut seen = BTreeSet::new();
        let mut stack = self.synsets[&s].hypernyms.clone();
        while let Some(x) = stack.pop() {
            if x == ancestor {
                return Ok(true);
            }
            if seen.insert(x) {
                stack.extend_from_slice(&self.synsets[&x].hypernyms);
            }
        }
        Ok(false)
    }

    fn check_acyclic(&self) -> Result<(), CorpusError> {
        let mut done: BTreeSet<SynsetId> = BTreeSet::new();
        for &root in self.synsets.keys() {
            if done.contains(&root) {
                continue;
            }
            // iterative DFS with explicit on-stack set
            let mut on_stack = BTreeSet::new();
            let mut stack: Vec<(SynsetId, usize)> = vec![(root, 0)];
            on_stack.insert(root);
            while let Some((node, i)) = stack.pop() {
                let hs = &self.synsets[&node].hypernyms;
                if i < hs.len() {
                    stack.push((node, i + 1));
                    let h = hs[i];
                    if on_stack.contains(&h) {
                        return Err(CorpusError::Cycle(self.name(h)));
                    }
                    if !done.contains(&h) {
                        on_stack.insert(h);
                        stack.push((h, 0));
                    }
                } else {
                    on_stack.remove(&node);
                    done.insert(node);
                }
            }
        }
        Ok(())
    }
}

/// One pair per meronym pointer on the whole side, in synset order.
pub fn extract_meronymy_pairs(graph: &SynsetGraph) -> Vec<MeronymyPair> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for s in graph.synsets() {
        for (&relation, parts) in &s.meronyms {
            for &part in parts {
                let p = MeronymyPair { relation, part, whole: s.id };
                if part != s.id && seen.insert(p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Rootward walk along first hypernyms; picks the first node whose share of
/// descendants not reached through the path child is a local maximum and
/// whose descendant count reaches `min_descendants`. Falls back to the root.
pub fn compute_blcs(graph: &SynsetGraph, min_descendants: usize) -> Vec<BlcAssignment> {
    let counts: BTreeMap<SynsetId, usize> = graph.synsets.keys().map(|&id| (id, graph.hyponym_closure(id).len())).collect();
    let mut out = Vec::with_capacity(graph.len());
    for s in graph.synsets() {
        let mut path = vec![s.id];
        while let Some(&h) = graph.synsets[path.last().expect("non-empty")].hypernyms.first() {
            path.push(h);
        }
        let gain = |i: usize| -> i64 {
            let own = counts[&path[i]] as i64;
            if i == 0 {
                own
            } else {
                own - counts[&path[i - 1]] as i64
            }
        };
        let pick = (0..path.len())
            .find(|&i| counts[&path[i]] >= min_descendants && (i + 1 == path.len() || gain(i) >= gain(i + 1)))
            .unwrap_or(path.len() - 1);
        let blc = path[pick];
        out.push(BlcAssignment { synset: s.id, blc, descendant_count: counts[&blc] });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TINY: &str = "  1 This software and database is being provided
00000010 03 n 01 root 0 001 ~ 00000020 n 0000 | the root
00000020 03 n 01 mid 0 003 @ 00000010 n 0000 ~ 00000030 n 0000 %p 00000030 n 0000 | the middle
00000030 03 n 02 leaf 0 Leaf(a) 1 002 @ 00000020 n 0000 #p 00000020 n 0000 | a leaf
";

    #[test]
    fn parses_and_names() {
        let g = parse_database(TINY, None).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.name(SynsetId::noun(30)), "leaf#1:n");
        assert_eq!(g.resolve("mid#1:n").unwrap(), SynsetId::noun(20));
        assert_eq!(g.get(SynsetId::noun(30)).unwrap().gloss, "a leaf");
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse_database("  1 license\n  2 more\n", None).unwrap().is_empty());
    }

    #[test]
    fn pairs_from_whole_side() {
        let g = parse_database(TINY, None).unwrap();
        let ps = extract_meronymy_pairs(&g);
        assert_eq!(ps, vec![MeronymyPair { relation: WnRelation::Part, part: SynsetId::noun(30), whole: SynsetId::noun(20) }]);
    }

    #[test]
    fn hyponymy_is_strict() {
        let g = parse_database(TINY, None).unwrap();
        let (a, c) = (SynsetId::noun(30), SynsetId::noun(10));
        assert!(g.is_hyponym_of(a, c).unwrap());
        assert!(!g.is_hyponym_of(a, a).unwrap());
        assert!(!g.is_hyponym_of(c, a).unwrap());
        assert!(g.is_hyponym_of(a, SynsetId::noun(99)).is_err());
    }

    #[test]
    fn errors() {
        let dangling = "00000010 03 n 01 a 0 001 @ 00000099 n 0000 | x\n";
        assert!(matches!(parse_database(dangling, None), Err(CorpusError::Dangling(_))));
        let cyc = "00000010 03 n 01 a 0 001 @ 00000020 n 0000 | x\n00000020 03 n 01 b 0 001 @ 00000010 n 0000 | y\n";
        assert!(matches!(parse_database(cyc, None), Err(CorpusError::Cycle(_))));
        let bad = "00000010 03 n 01 a 0 0x1 | x\n";
        assert!(matches!(parse_database(bad, None), Err(CorpusError::Parse { line: 1, .. })));
        let inv = "00000010 03 n 01 a 0 001 #m 00000020 n 0000 | x\n00000020 03 n 01 b 0 000 | y\n";
        assert!(matches!(parse_database(inv, None), Err(CorpusError::Inverse(_))));
    }

    #[test]
    fn index_sense_numbers() {
        let data = "00000010 03 n 01 heart 0 000 | feelings\n00000020 03 n 01 heart 0 000 | organ\n";
        let index = "heart n 2 0 2 0 00000020 00000010\n";
        let g = parse_database(data, Some(index)).unwrap();
        assert_eq!(g.name(SynsetId::noun(20)), "heart#1:n");
        assert_eq!(g.name(SynsetId::noun(10)), "heart#2:n");
    }

    #[test]
    fn single_synset_is_own_blc() {
        let g = parse_database("00000010 03 n 01 a 0 000 | x\n", None).unwrap();
        let b = compute_blcs(&g, 0);
        assert_eq!(b[0].blc, SynsetId::noun(10));
    }
}
