//! Kernel expression algebra.
//!
//! Candidate kernels are sums and products of three base kernels (SE, LIN,
//! PER). The grammar enumerates seven fixed shapes; two candidates are the
//! same iff their canonical strings are equal. Canonicalization sorts the
//! operands of every commutative node but preserves nesting, so structurally
//! distinct compositions such as `LIN*(PER*SE)` and `PER*(SE*LIN)` stay
//! separate candidates even though they are algebraically equal.
//!
//! Canonical strings are the wire format for kernel identity everywhere in
//! this crate: CSV column headers, CLI arguments, and JSON reports.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;

/// Base covariance functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseKernel {
    /// Squared-exponential: smooth local variation.
    Se,
    /// Linear in the inputs.
    Lin,
    /// Exactly periodic.
    Per,
}

impl BaseKernel {
    pub const ALL: [BaseKernel; 3] = [BaseKernel::Se, BaseKernel::Lin, BaseKernel::Per];

    pub fn name(self) -> &'static str {
        match self {
            BaseKernel::Se => "SE",
            BaseKernel::Lin => "LIN",
            BaseKernel::Per => "PER",
        }
    }

    /// Number of hyperparameters of the base kernel itself (noise excluded).
    pub fn param_count(self) -> usize {
        match self {
            BaseKernel::Se => 2,
            BaseKernel::Lin => 2,
            BaseKernel::Per => 3,
        }
    }

    /// Ordering used for operand sorting and description tie-breaks.
    fn precedence(self) -> u8 {
        match self {
            BaseKernel::Per => 0,
            BaseKernel::Se => 1,
            BaseKernel::Lin => 2,
        }
    }

    pub fn from_name(s: &str) -> Option<BaseKernel> {
        match s {
            "SE" => Some(BaseKernel::Se),
            "LIN" => Some(BaseKernel::Lin),
            "PER" => Some(BaseKernel::Per),
            _ => None,
        }
    }
}

/// Algebraic kernel expression tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KernelExpr {
    Base(BaseKernel),
    Sum(Box<KernelExpr>, Box<KernelExpr>),
    Product(Box<KernelExpr>, Box<KernelExpr>),
}

impl KernelExpr {
    pub fn base(b: BaseKernel) -> Self {
        KernelExpr::Base(b)
    }

    pub fn sum(left: KernelExpr, right: KernelExpr) -> Self {
        KernelExpr::Sum(Box::new(left), Box::new(right))
    }

    pub fn product(left: KernelExpr, right: KernelExpr) -> Self {
        KernelExpr::Product(Box::new(left), Box::new(right))
    }

    /// Number of base-kernel leaves.
    pub fn leaf_count(&self) -> usize {
        match self {
            KernelExpr::Base(_) => 1,
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => l.leaf_count() + r.leaf_count(),
        }
    }

    /// Leaves in depth-first order.
    pub fn leaves(&self) -> Vec<BaseKernel> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<BaseKernel>) {
        match self {
            KernelExpr::Base(b) => out.push(*b),
            KernelExpr::Sum(l, r) | KernelExpr::Product(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// Canonical form: operands of every commutative node sorted by the
    /// documented order (fewer leaves first, ties by base precedence
    /// PER, SE, LIN). Nesting is never flattened. Idempotent.
    pub fn canonical(&self) -> KernelExpr {
        match self {
            KernelExpr::Base(b) => KernelExpr::Base(*b),
            KernelExpr::Sum(l, r) => {
                let (a, b) = Self::ordered(l.canonical(), r.canonical());
                KernelExpr::sum(a, b)
            }
            KernelExpr::Product(l, r) => {
                let (a, b) = Self::ordered(l.canonical(), r.canonical());
                KernelExpr::product(a, b)
            }
        }
    }

    fn ordered(a: KernelExpr, b: KernelExpr) -> (KernelExpr, KernelExpr) {
        if Self::operand_cmp(&a, &b) == std::cmp::Ordering::Greater {
            (b, a)
        } else {
            (a, b)
        }
    }

    /// Total order on canonical operands: leaf count, then node kind
    /// (base < product < sum), then base precedence / children.
    fn operand_cmp(a: &KernelExpr, b: &KernelExpr) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match a.leaf_count().cmp(&b.leaf_count()) {
            Ordering::Equal => {}
            other => return other,
        }
        fn kind_rank(e: &KernelExpr) -> u8 {
            match e {
                KernelExpr::Base(_) => 0,
                KernelExpr::Product(_, _) => 1,
                KernelExpr::Sum(_, _) => 2,
            }
        }
        match kind_rank(a).cmp(&kind_rank(b)) {
            Ordering::Equal => {}
            other => return other,
        }
        match (a, b) {
            (KernelExpr::Base(x), KernelExpr::Base(y)) => x.precedence().cmp(&y.precedence()),
            (KernelExpr::Sum(al, ar), KernelExpr::Sum(bl, br))
            | (KernelExpr::Product(al, ar), KernelExpr::Product(bl, br)) => {
                Self::operand_cmp(al, bl).then_with(|| Self::operand_cmp(ar, br))
            }
            _ => unreachable!("kind ranks already compared"),
        }
    }

    /// Canonical string; the identity of the candidate.
    pub fn canonical_string(&self) -> String {
        self.canonical().render()
    }

    fn render(&self) -> String {
        match self {
            KernelExpr::Base(b) => b.name().to_string(),
            KernelExpr::Sum(l, r) => {
                format!("{}+{}", Self::render_child(l, false), Self::render_child(r, false))
            }
            KernelExpr::Product(l, r) => {
                format!("{}*{}", Self::render_child(l, true), Self::render_child(r, true))
            }
        }
    }

    /// Parenthesize composite children of products, and sum children of sums,
    /// so nesting survives in the string form.
    fn render_child(child: &KernelExpr, parent_is_product: bool) -> String {
        let needs_parens = match child {
            KernelExpr::Base(_) => false,
            KernelExpr::Product(_, _) => parent_is_product,
            KernelExpr::Sum(_, _) => true,
        };
        if needs_parens {
            format!("({})", child.render())
        } else {
            child.render()
        }
    }

    /// Parses a kernel string (`+`, `*`, parentheses, base names). The inverse
    /// of [`KernelExpr::canonical_string`] up to canonical ordering.
    pub fn parse(input: &str) -> Result<KernelExpr> {
        let mut parser = Parser {
            chars: input.trim().as_bytes(),
            pos: 0,
        };
        let expr = parser.parse_sum()?;
        if parser.pos != parser.chars.len() {
            return Err(Error::validation(format!(
                "unexpected trailing input at byte {} in kernel string {input:?}",
                parser.pos
            )));
        }
        Ok(expr)
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

struct Parser<'a> {
    chars: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn parse_sum(&mut self) -> Result<KernelExpr> {
        let mut left = self.parse_product()?;
        while self.peek() == Some(b'+') {
            self.pos += 1;
            let right = self.parse_product()?;
            left = KernelExpr::sum(left, right);
        }
        Ok(left)
    }

    fn parse_product(&mut self) -> Result<KernelExpr> {
        let mut left = self.parse_atom()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            let right = self.parse_atom()?;
            left = KernelExpr::product(left, right);
        }
        Ok(left)
    }

    fn parse_atom(&mut self) -> Result<KernelExpr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.parse_sum()?;
                if self.peek() != Some(b')') {
                    return Err(Error::validation("unbalanced parenthesis in kernel string"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .peek()
                    .map(|c| c.is_ascii_alphabetic())
                    .unwrap_or(false)
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
                BaseKernel::from_name(name)
                    .map(KernelExpr::Base)
                    .ok_or_else(|| Error::validation(format!("unknown base kernel {name:?}")))
            }
            other => Err(Error::validation(format!(
                "expected base kernel or '(' in kernel string, found {:?}",
                other.map(char::from)
            ))),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.chars.get(self.pos).copied()
    }
}

/// Role of one hyperparameter slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamRole {
    LogVariance,
    LogLengthscale,
    LogPeriod,
    /// LIN shift, stored untransformed.
    Shift,
    LogNoiseVariance,
}

/// One named hyperparameter slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub role: ParamRole,
}

/// Ordered hyperparameter slots of an expression: depth-first over the
/// leaves, then one trailing noise-variance slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub entries: Vec<ParamSpec>,
}

impl ParamLayout {
    pub fn count(&self) -> usize {
        self.entries.len()
    }
}

/// Hyperparameter layout of `e`, including the trailing noise slot.
pub fn param_layout(e: &KernelExpr) -> ParamLayout {
    let mut entries = Vec::new();
    for (idx, leaf) in e.leaves().into_iter().enumerate() {
        let prefix = format!("{}{idx}", leaf.name());
        entries.push(ParamSpec {
            name: format!("{prefix}.log_variance"),
            role: ParamRole::LogVariance,
        });
        match leaf {
            BaseKernel::Se => entries.push(ParamSpec {
                name: format!("{prefix}.log_lengthscale"),
                role: ParamRole::LogLengthscale,
            }),
            BaseKernel::Lin => entries.push(ParamSpec {
                name: format!("{prefix}.shift"),
                role: ParamRole::Shift,
            }),
            BaseKernel::Per => {
                entries.push(ParamSpec {
                    name: format!("{prefix}.log_lengthscale"),
                    role: ParamRole::LogLengthscale,
                });
                entries.push(ParamSpec {
                    name: format!("{prefix}.log_period"),
                    role: ParamRole::LogPeriod,
                });
            }
        }
    }
    entries.push(ParamSpec {
        name: "noise.log_variance".to_string(),
        role: ParamRole::LogNoiseVariance,
    });
    ParamLayout { entries }
}

/// The seven composition shapes, with `a`/`b` the unordered inner pair and
/// `c` the outer operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// `a`
    Single,
    /// `a*b`
    ProductPair,
    /// `a+b`
    SumPair,
    /// `(a*b)*c`
    ProductTimesBase,
    /// `(a+b)*c`
    SumTimesBase,
    /// `(a*b)+c`
    ProductPlusBase,
    /// `(a+b)+c`
    SumPlusBase,
}

impl Form {
    pub const ALL: [Form; 7] = [
        Form::Single,
        Form::ProductPair,
        Form::SumPair,
        Form::ProductTimesBase,
        Form::SumTimesBase,
        Form::ProductPlusBase,
        Form::SumPlusBase,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Form::Single => "a",
            Form::ProductPair => "a*b",
            Form::SumPair => "a+b",
            Form::ProductTimesBase => "(a*b)*c",
            Form::SumTimesBase => "(a+b)*c",
            Form::ProductPlusBase => "(a*b)+c",
            Form::SumPlusBase => "(a+b)+c",
        }
    }

    pub fn from_token(s: &str) -> Option<Form> {
        Form::ALL.iter().copied().find(|f| f.token() == s)
    }
}

/// Base kernels plus enabled composition forms.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub bases: Vec<BaseKernel>,
    pub forms: Vec<Form>,
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar {
            bases: BaseKernel::ALL.to_vec(),
            forms: Form::ALL.to_vec(),
        }
    }
}

impl Grammar {
    pub fn with_bases(bases: &[BaseKernel]) -> Self {
        Grammar {
            bases: bases.to_vec(),
            forms: Form::ALL.to_vec(),
        }
    }

    /// Parses the grammar config format: one directive per line, `base NAME`
    /// or `form TOKEN`; `#` starts a comment. Missing `form` lines enable all
    /// seven forms.
    pub fn parse(text: &str) -> Result<Grammar> {
        let mut bases = Vec::new();
        let mut forms = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (keyword, value) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| Error::parse(i + 1, format!("expected 'base NAME' or 'form TOKEN', got {line:?}")))?;
            let value = value.trim();
            match keyword {
                "base" => {
                    let b = BaseKernel::from_name(value)
                        .ok_or_else(|| Error::parse(i + 1, format!("unknown base kernel {value:?}")))?;
                    if !bases.contains(&b) {
                        bases.push(b);
                    }
                }
                "form" => {
                    let f = Form::from_token(value)
                        .ok_or_else(|| Error::parse(i + 1, format!("unknown form {value:?}")))?;
                    if !forms.contains(&f) {
                        forms.push(f);
                    }
                }
                other => {
                    return Err(Error::parse(i + 1, format!("unknown directive {other:?}")));
                }
            }
        }
        if forms.is_empty() {
            forms = Form::ALL.to_vec();
        }
        if bases.is_empty() {
            return Err(Error::validation("grammar file declares no base kernels"));
        }
        Ok(Grammar { bases, forms })
    }
}

/// Enumerates all non-redundant candidates of the enabled forms.
///
/// Redundancy is commutative equality of the inner pair only: `{a,b}` is an
/// unordered multiset while `c` ranges over every base, so `(SE+LIN)+PER` and
/// `(SE+PER)+LIN` are distinct candidates. For `b` bases and all seven forms
/// the count is `b + 2*T(b) + 4*b*T(b)` with `T(b) = b*(b+1)/2`.
///
/// The output is sorted by canonical string and free of duplicates.
pub fn expand(grammar: &Grammar) -> Result<Vec<KernelExpr>> {
    if grammar.bases.is_empty() {
        return Err(Error::validation("kernel grammar needs at least one base kernel"));
    }
    let bases = &grammar.bases;
    let mut by_string: BTreeMap<String, KernelExpr> = BTreeMap::new();
    let mut add = |e: KernelExpr| {
        let canonical = e.canonical();
        by_string.entry(canonical.render()).or_insert(canonical);
    };

    for &form in &grammar.forms {
        match form {
            Form::Single => {
                for &a in bases {
                    add(KernelExpr::base(a));
                }
            }
            Form::ProductPair | Form::SumPair => {
                for (i, &a) in bases.iter().enumerate() {
                    for &b in &bases[i..] {
                        let (l, r) = (KernelExpr::base(a), KernelExpr::base(b));
                        add(match form {
                            Form::ProductPair => KernelExpr::product(l, r),
                            _ => KernelExpr::sum(l, r),
                        });
                    }
                }
            }
            Form::ProductTimesBase
            | Form::SumTimesBase
            | Form::ProductPlusBase
            | Form::SumPlusBase => {
                for (i, &a) in bases.iter().enumerate() {
                    for &b in &bases[i..] {
                        for &c in bases {
                            let inner = match form {
                                Form::ProductTimesBase | Form::ProductPlusBase => {
                                    KernelExpr::product(KernelExpr::base(a), KernelExpr::base(b))
                                }
                                _ => KernelExpr::sum(KernelExpr::base(a), KernelExpr::base(b)),
                            };
                            let outer = KernelExpr::base(c);
                            add(match form {
                                Form::ProductTimesBase | Form::SumTimesBase => {
                                    KernelExpr::product(inner, outer)
                                }
                                _ => KernelExpr::sum(inner, outer),
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(by_string.into_values().collect())
}

/// A product term of the sum-of-products expansion, as base-kernel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Term {
    per: usize,
    se: usize,
    lin: usize,
}

impl Term {
    fn one(b: BaseKernel) -> Term {
        match b {
            BaseKernel::Per => Term { per: 1, se: 0, lin: 0 },
            BaseKernel::Se => Term { per: 0, se: 1, lin: 0 },
            BaseKernel::Lin => Term { per: 0, se: 0, lin: 1 },
        }
    }

    fn merge(self, other: Term) -> Term {
        Term {
            per: self.per + other.per,
            se: self.se + other.se,
            lin: self.lin + other.lin,
        }
    }

    fn factor_count(self) -> usize {
        self.per + self.se + self.lin
    }

    /// Factors as precedence ranks, for the sentence ordering tie-break.
    fn rank_vec(self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.factor_count());
        v.extend(std::iter::repeat_n(0u8, self.per));
        v.extend(std::iter::repeat_n(1u8, self.se));
        v.extend(std::iter::repeat_n(2u8, self.lin));
        v
    }

    /// Sentence for one product term. The noun comes from the strongest
    /// structural content (periodicity, then quadratic trend, then
    /// smoothness, then linearity); leftover SE factors add the smoothness
    /// modifier and leftover LIN factors the varying-amplitude modifier,
    /// in that order.
    fn sentence(self) -> String {
        let Term { per, se, lin } = self;
        let mut out = String::new();
        let mut lin_left = lin;
        if per >= 1 {
            out.push_str("a periodic function");
            for _ in 1..per {
                out.push_str(" modulated by a periodic function");
            }
        } else if lin >= 2 {
            out.push_str("a quadratic function");
            lin_left -= 2;
        } else if se >= 1 {
            out.push_str("a smooth function");
        } else {
            out.push_str("a linear function");
            lin_left -= 1;
        }
        let noun_is_smooth = per == 0 && lin < 2 && se >= 1;
        if se >= 1 && !noun_is_smooth {
            out.push_str(" whose shape changes smoothly");
        }
        match lin_left {
            0 => {}
            1 => out.push_str(" with linearly varying amplitude"),
            _ => out.push_str(" with quadratically varying amplitude"),
        }
        out
    }
}

fn terms(e: &KernelExpr) -> Vec<Term> {
    match e {
        KernelExpr::Base(b) => vec![Term::one(*b)],
        KernelExpr::Sum(l, r) => {
            let mut t = terms(l);
            t.extend(terms(r));
            t
        }
        KernelExpr::Product(l, r) => {
            let lt = terms(l);
            let rt = terms(r);
            let mut out = Vec::with_capacity(lt.len() * rt.len());
            for &a in &lt {
                for &b in &rt {
                    out.push(a.merge(b));
                }
            }
            out
        }
    }
}

/// One sentence per additive component of `e`, after distributing products
/// over sums. Sorted by ascending factor count, ties by base precedence
/// PER, SE, LIN. The distribution is for interpretation only; fitting always
/// uses the expression as written.
pub fn describe(e: &KernelExpr) -> Vec<String> {
    let mut ts = terms(e);
    ts.sort_by(|a, b| {
        a.factor_count()
            .cmp(&b.factor_count())
            .then_with(|| a.rank_vec().cmp(&b.rank_vec()))
    });
    ts.into_iter().map(Term::sentence).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn se() -> KernelExpr {
        KernelExpr::base(BaseKernel::Se)
    }
    fn lin() -> KernelExpr {
        KernelExpr::base(BaseKernel::Lin)
    }
    fn per() -> KernelExpr {
        KernelExpr::base(BaseKernel::Per)
    }

    fn closed_form(b: usize) -> usize {
        let t = b * (b + 1) / 2;
        b + 2 * t + 4 * b * t
    }

    #[test]
    fn product_operand_order_is_commutative() {
        let a = KernelExpr::product(lin(), se());
        let b = KernelExpr::product(se(), lin());
        assert_eq!(a.canonical_string(), "SE*LIN");
        assert_eq!(b.canonical_string(), "SE*LIN");
    }

    #[test]
    fn sum_of_product_and_base_orders_base_first() {
        let e = KernelExpr::sum(KernelExpr::product(per(), se()), lin());
        assert_eq!(e.canonical_string(), "LIN+PER*SE");
    }

    #[test]
    fn nested_products_do_not_flatten() {
        let a = KernelExpr::product(KernelExpr::product(se(), lin()), per());
        let b = KernelExpr::product(KernelExpr::product(se(), per()), lin());
        assert_ne!(a.canonical_string(), b.canonical_string());
        assert_eq!(a.canonical_string(), "PER*(SE*LIN)");
        assert_eq!(b.canonical_string(), "LIN*(PER*SE)");
    }

    #[test]
    fn canonical_is_idempotent() {
        let e = KernelExpr::sum(
            KernelExpr::product(lin(), KernelExpr::sum(se(), per())),
            per(),
        );
        let once = e.canonical();
        assert_eq!(once.canonical(), once);
        assert_eq!(once.canonical_string(), e.canonical_string());
    }

    #[test]
    fn expand_all_three_bases_yields_87() {
        let kernels = expand(&Grammar::default()).unwrap();
        assert_eq!(kernels.len(), 87);
        assert_eq!(kernels.len(), closed_form(3));
        let strings: Vec<String> = kernels.iter().map(|k| k.canonical_string()).collect();
        let mut dedup = strings.clone();
        dedup.dedup();
        assert_eq!(strings, dedup, "no duplicate canonical strings");
        let mut sorted = strings.clone();
        sorted.sort();
        assert_eq!(strings, sorted, "output sorted by canonical string");
        assert!(strings.contains(&"LIN+PER*SE".to_string()));
    }

    #[test]
    fn expand_single_base_yields_the_seven_forms() {
        let kernels = expand(&Grammar::with_bases(&[BaseKernel::Se])).unwrap();
        let strings: Vec<String> = kernels.iter().map(|k| k.canonical_string()).collect();
        assert_eq!(
            strings,
            vec![
                "SE",
                "SE*(SE*SE)",
                "SE*(SE+SE)",
                "SE*SE",
                "SE+(SE+SE)",
                "SE+SE",
                "SE+SE*SE",
            ]
        );
        assert_eq!(strings.len(), closed_form(1));
    }

    #[test]
    fn expand_two_bases_yields_32() {
        let kernels = expand(&Grammar::with_bases(&[BaseKernel::Se, BaseKernel::Per])).unwrap();
        assert_eq!(kernels.len(), 32);
        assert_eq!(kernels.len(), closed_form(2));
    }

    #[test]
    fn expand_empty_basis_is_rejected() {
        let grammar = Grammar {
            bases: vec![],
            forms: Form::ALL.to_vec(),
        };
        assert!(matches!(expand(&grammar), Err(Error::Validation(_))));
    }

    #[test]
    fn grammar_file_round_trip() {
        let g = Grammar::parse("# comment\nbase SE\nbase PER\nform a\nform a+b\n").unwrap();
        assert_eq!(g.bases, vec![BaseKernel::Se, BaseKernel::Per]);
        assert_eq!(g.forms, vec![Form::Single, Form::SumPair]);
        let kernels = expand(&g).unwrap();
        let strings: Vec<String> = kernels.iter().map(|k| k.canonical_string()).collect();
        assert_eq!(strings, vec!["PER", "PER+PER", "PER+SE", "SE", "SE+SE"]);
    }

    #[test]
    fn grammar_file_bad_directive_errors() {
        assert!(matches!(
            Grammar::parse("base SE\nshape a+b\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn param_layout_counts() {
        assert_eq!(param_layout(&se()).count(), 3);
        assert_eq!(param_layout(&lin()).count(), 3);
        let e = KernelExpr::sum(KernelExpr::product(per(), se()), lin());
        assert_eq!(param_layout(&e).count(), 8);
        let roles: Vec<ParamRole> = param_layout(&e).entries.iter().map(|p| p.role).collect();
        assert_eq!(roles.last(), Some(&ParamRole::LogNoiseVariance));
    }

    #[test]
    fn describe_matches_rule_table() {
        let e = KernelExpr::sum(KernelExpr::product(per(), se()), lin());
        assert_eq!(
            describe(&e),
            vec![
                "a linear function",
                "a periodic function whose shape changes smoothly"
            ]
        );
        let e = KernelExpr::sum(per(), se());
        assert_eq!(describe(&e), vec!["a periodic function", "a smooth function"]);
        let e = KernelExpr::sum(
            KernelExpr::product(per(), per()),
            KernelExpr::product(se(), per()),
        );
        assert_eq!(
            describe(&e),
            vec![
                "a periodic function modulated by a periodic function",
                "a periodic function whose shape changes smoothly"
            ]
        );
    }

    #[test]
    fn describe_distributes_products_over_sums() {
        // (SE+LIN)*PER -> two components.
        let e = KernelExpr::product(KernelExpr::sum(se(), lin()), per());
        assert_eq!(
            describe(&e),
            vec![
                "a periodic function whose shape changes smoothly",
                "a periodic function with linearly varying amplitude"
            ]
        );
    }

    #[test]
    fn describe_three_factor_terms_compose_modifiers() {
        let e = KernelExpr::product(KernelExpr::product(se(), per()), lin());
        assert_eq!(
            describe(&e),
            vec!["a periodic function whose shape changes smoothly with linearly varying amplitude"]
        );
        let e = KernelExpr::product(KernelExpr::product(lin(), lin()), se());
        assert_eq!(describe(&e), vec!["a quadratic function whose shape changes smoothly"]);
    }

    fn arb_expr() -> impl Strategy<Value = KernelExpr> {
        let leaf = prop_oneof![Just(se()), Just(lin()), Just(per())];
        leaf.prop_recursive(4, 32, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| KernelExpr::sum(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| KernelExpr::product(a, b)),
            ]
        })
    }

    fn swap_randomly(e: &KernelExpr, flips: &mut impl Iterator<Item = bool>) -> KernelExpr {
        match e {
            KernelExpr::Base(b) => KernelExpr::Base(*b),
            KernelExpr::Sum(l, r) => {
                let (a, b) = (swap_randomly(l, flips), swap_randomly(r, flips));
                if flips.next().unwrap_or(false) {
                    KernelExpr::sum(b, a)
                } else {
                    KernelExpr::sum(a, b)
                }
            }
            KernelExpr::Product(l, r) => {
                let (a, b) = (swap_randomly(l, flips), swap_randomly(r, flips));
                if flips.next().unwrap_or(false) {
                    KernelExpr::product(b, a)
                } else {
                    KernelExpr::product(a, b)
                }
            }
        }
    }

    proptest! {
        #[test]
        fn canonical_string_invariant_under_operand_swaps(
            e in arb_expr(),
            flips in proptest::collection::vec(any::<bool>(), 64),
        ) {
            let swapped = swap_randomly(&e, &mut flips.into_iter());
            prop_assert_eq!(e.canonical_string(), swapped.canonical_string());
        }

        #[test]
        fn canonicalization_is_a_fixed_point(e in arb_expr()) {
            let c = e.canonical();
            prop_assert_eq!(c.canonical(), c.clone());
            let parsed = KernelExpr::parse(&c.render()).unwrap();
            prop_assert_eq!(parsed.canonical(), c);
        }

        #[test]
        fn describe_emits_one_sentence_per_product_term(e in arb_expr()) {
            prop_assert_eq!(describe(&e).len(), terms(&e).len());
        }
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(KernelExpr::parse("SE+").is_err());
        assert!(KernelExpr::parse("(SE").is_err());
        assert!(KernelExpr::parse("RBF").is_err());
        assert!(KernelExpr::parse("SE LIN").is_err());
    }
}
