use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::kb::{Constraint, KnowledgeBase, RuleCategory};
use super::predicate::{AttrPred, Matcher, Ref, Satisfaction, Scope};
use crate::codec::{Exercise, RuleOverride};
use crate::program::{
    attr_names, enumerate_nodes, format_specifiers, infer_type, AttrValue, BlockId, BlockKind,
    DataType, Expr, KindFilter, NodeRef, Program, ScopeIndex, Stmt, TypeError,
};

/// Problem tags and rule switches of the exercise being checked.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub tags: &'a BTreeSet<String>,
    pub overrides: &'a [RuleOverride],
}

impl<'a> EvalContext<'a> {
    pub fn new(tags: &'a BTreeSet<String>, overrides: &'a [RuleOverride]) -> Self {
        EvalContext { tags, overrides }
    }

    pub fn is_enabled(&self, c: &Constraint) -> bool {
        self.overrides
            .iter()
            .rev()
            .find(|o| o.id == c.id)
            .map_or(c.enabled, |o| o.enabled)
    }
}

impl<'a> From<&'a Exercise> for EvalContext<'a> {
    fn from(ex: &'a Exercise) -> Self {
        EvalContext::new(&ex.problem_tags, &ex.rule_overrides)
    }
}

/// One unsatisfied (constraint, binding) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub constraint_id: String,
    pub category: RuleCategory,
    /// Binding name to block id.
    pub bindings: BTreeMap<String, BlockId>,
    /// Block ids in matcher order.
    #[serde(skip)]
    pub binding_order: Vec<BlockId>,
    /// Values for feedback placeholders.
    pub explanation_data: BTreeMap<String, String>,
}

/// A relevance binding and whether Cs held for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingResult {
    /// `(binding name, block id)` in matcher order.
    pub binding: Vec<(String, BlockId)>,
    pub satisfied: bool,
}

/// Precomputed structure of a program shared by all rules.
pub struct ProgramFacts<'p> {
    nodes: Vec<NodeRef<'p>>,
    parent: Vec<Option<usize>>,
    end: Vec<usize>,
    scopes: ScopeIndex,
    top: Vec<usize>,
}

impl<'p> ProgramFacts<'p> {
    pub fn new(program: &'p Program) -> Self {
        let nodes = enumerate_nodes(program, &KindFilter::All);
        let end: Vec<usize> = nodes.iter().map(|n| n.index + n.block.count()).collect();
        let mut parent = vec![None; nodes.len()];
        let mut stack: Vec<usize> = Vec::new();
        for i in 0..nodes.len() {
            while stack.last().is_some_and(|&s| end[s] <= i) {
                stack.pop();
            }
            parent[i] = stack.last().copied();
            stack.push(i);
        }
        let top = (0..nodes.len()).filter(|&i| parent[i].is_none()).collect();
        ProgramFacts {
            nodes,
            parent,
            end,
            scopes: ScopeIndex::build(program),
            top,
        }
    }

    fn stmt(&self, i: usize) -> &'p Stmt {
        &self.nodes[i].block.stmt
    }

    fn kind(&self, i: usize) -> BlockKind {
        self.nodes[i].block.kind()
    }

    fn is_descendant(&self, i: usize, of: usize) -> bool {
        i > of && i < self.end[of]
    }

    fn children(&self, i: Option<usize>) -> Vec<usize> {
        match i {
            None => self.top.clone(),
            Some(p) => {
                let mut out = Vec::new();
                let mut c = p + 1;
                while c < self.end[p] {
                    out.push(c);
                    c = self.end[c];
                }
                out
            }
        }
    }

    /// Types of an attribute, one per typable value.
    fn attr_types(&self, i: usize, attr: &str) -> Vec<DataType> {
        let env = self.scopes.at(i);
        let block = self.nodes[i].block;
        match block.attr(attr) {
            Some(AttrValue::Type(t)) => vec![t.into_owned()],
            Some(AttrValue::Expr(e)) => infer_type(e, env).into_iter().collect(),
            Some(AttrValue::Exprs(es)) => es.iter().filter_map(|e| infer_type(e, env).ok()).collect(),
            Some(AttrValue::Ident(name)) => match &block.stmt {
                Stmt::Declaration { ty, .. } => vec![ty.clone()],
                Stmt::ForLoop { .. } | Stmt::FileOp(_) => env.var(name).cloned().into_iter().collect(),
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    /// The single type of a reference, if it has exactly one.
    fn single_type(&self, i: usize, attr: &str) -> Option<DataType> {
        let mut ts = self.attr_types(i, attr);
        (ts.len() == 1 && self.attr_is_single(i, attr)).then(|| ts.remove(0))
    }

    fn attr_is_single(&self, i: usize, attr: &str) -> bool {
        !matches!(self.nodes[i].block.attr(attr), Some(AttrValue::Exprs(_)))
    }

    fn present(&self, i: usize, attr: &str) -> bool {
        match self.nodes[i].block.attr(attr) {
            None => false,
            Some(AttrValue::Exprs(es)) => !es.is_empty(),
            Some(AttrValue::Params(ps)) => !ps.is_empty(),
            Some(_) => true,
        }
    }

    fn text(&self, i: usize, attr: &str) -> Option<String> {
        self.nodes[i].block.attr(attr).map(|v| v.text())
    }

    fn exprs_of(&self, i: usize, attr: &str) -> Vec<&'p Expr> {
        let stmt = self.stmt(i);
        stmt.expressions()
            .into_iter()
            .filter(|(a, _)| attr == "*" || *a == attr)
            .map(|(_, e)| e)
            .collect()
    }

    /// Every expression of the block, with a `FunctionCall` statement
    /// presented as a call expression.
    fn checked_exprs(&self, i: usize) -> Vec<Expr> {
        match self.stmt(i) {
            Stmt::FunctionCall { callee, args } => vec![Expr::Call(callee.clone(), args.clone())],
            s => s.expressions().into_iter().map(|(_, e)| e.clone()).collect(),
        }
    }
}

type Binding = Vec<(String, usize)>;

fn lookup(binding: &Binding, name: &str) -> usize {
    binding
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, i)| *i)
        .expect("bindings are checked when the knowledge base loads")
}

fn attr_pred(f: &ProgramFacts, p: &AttrPred, i: usize, b: &Binding) -> bool {
    match p {
        AttrPred::Present(a) => f.present(i, a),
        AttrPred::Absent(a) => !f.present(i, a),
        AttrPred::Equals { attr, value } => f.text(i, attr).as_deref() == Some(value.as_str()),
        AttrPred::SameAs { attr, reference } => {
            let other = lookup(b, &reference.binding);
            let theirs = reference.attr.as_deref().and_then(|a| f.text(other, a));
            theirs.is_some() && f.text(i, attr) == theirs
        }
        AttrPred::Contains { attr, node } => f.exprs_of(i, attr).iter().any(|e| e.contains(*node)),
        AttrPred::TypeIs { attr, class } => {
            let ts = f.attr_types(i, attr);
            !ts.is_empty() && ts.iter().all(|t| class.matches(t))
        }
        AttrPred::Is(kinds) => kinds.contains(&f.kind(i)),
        AttrPred::Inside(kinds) => {
            let mut cur = f.parent[i];
            while let Some(p) = cur {
                if kinds.contains(&f.kind(p)) {
                    return true;
                }
                cur = f.parent[p];
            }
            false
        }
        AttrPred::InsideBinding(name) => f.is_descendant(i, lookup(b, name)),
        AttrPred::Parent(kinds) => f.parent[i].is_some_and(|p| kinds.contains(&f.kind(p))),
        AttrPred::TopLevel(want) => f.parent[i].is_none() == *want,
        AttrPred::Not(inner) => !attr_pred(f, inner, i, b),
        AttrPred::Any(ps) => ps.iter().any(|p| attr_pred(f, p, i, b)),
    }
}

fn candidates(
    f: &ProgramFacts,
    kinds: &[BlockKind],
    scope: &Scope,
    preds: &[AttrPred],
    b: &Binding,
) -> usize {
    let range: Box<dyn Fn(usize) -> bool> = match scope {
        Scope::Anywhere => Box::new(|_| true),
        Scope::Within(name) => {
            let a = lookup(b, name);
            Box::new(move |i| f.is_descendant(i, a))
        }
        Scope::Before(name) => {
            let a = lookup(b, name);
            Box::new(move |i| i < a && !f.is_descendant(a, i))
        }
        Scope::After(name) => {
            let a = lookup(b, name);
            Box::new(move |i| i >= f.end[a])
        }
    };
    (0..f.nodes.len())
        .filter(|&i| range(i))
        .filter(|&i| kinds.is_empty() || kinds.contains(&f.kind(i)))
        .filter(|&i| preds.iter().all(|p| attr_pred(f, p, i, b)))
        .count()
}

fn output_spec_ok(spec: char, t: &DataType) -> bool {
    match spec {
        'd' | 'c' => t.is_integral(),
        'f' => *t == DataType::Float,
        's' => t.decayed() == DataType::pointer_to(DataType::Char),
        _ => false,
    }
}

fn input_spec_ok(spec: char, t: &DataType) -> bool {
    match (spec, t.decayed()) {
        ('d', DataType::PointerTo(inner)) => *inner == DataType::Int,
        ('f', DataType::PointerTo(inner)) => *inner == DataType::Float,
        ('c' | 's', DataType::PointerTo(inner)) => *inner == DataType::Char,
        _ => false,
    }
}

fn reads_input(stmt: &Stmt) -> bool {
    match stmt {
        Stmt::Input { .. } => true,
        Stmt::FileOp(op) => op.op == crate::program::FileOpKind::Read,
        _ => false,
    }
}

fn satisfied(f: &ProgramFacts, cs: &Satisfaction, b: &Binding) -> bool {
    use Satisfaction as S;
    match cs {
        S::All(xs) => xs.iter().all(|x| satisfied(f, x, b)),
        S::Any(xs) => xs.iter().any(|x| satisfied(f, x, b)),
        S::Not(x) => !satisfied(f, x, b),
        S::Exists(q) => candidates(f, &q.kind, &q.scope, &q.preds, b) > 0,
        S::CountAtLeast(q) => candidates(f, &q.kind, &q.scope, &q.preds, b) >= q.n,
        S::TypeEquals(l, r) | S::TypeAccepts(l, r) => {
            let ty = |x: &Ref| {
                x.attr
                    .as_deref()
                    .and_then(|a| f.single_type(lookup(b, &x.binding), a))
            };
            match (ty(l), ty(r)) {
                (Some(lt), Some(rt)) if matches!(cs, S::TypeEquals(..)) => lt.equivalent(&rt),
                (Some(lt), Some(rt)) => lt.accepts(&rt),
                _ => true,
            }
        }
        S::TypeIs { reference, class } => match &reference.attr {
            Some(a) => f
                .attr_types(lookup(b, &reference.binding), a)
                .iter()
                .all(|t| class.matches(t)),
            None => true,
        },
        S::AttrEquals { reference, value } => {
            let i = lookup(b, &reference.binding);
            reference.attr.as_deref().and_then(|a| f.text(i, a)).as_deref() == Some(value.as_str())
        }
        S::Holds { binding, preds } => {
            let i = lookup(b, binding);
            preds.iter().all(|p| attr_pred(f, p, i, b))
        }
        S::Present(r) => {
            let i = lookup(b, &r.binding);
            r.attr.as_deref().is_none_or(|a| f.present(i, a))
        }
        S::DeclaredBeforeUse(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            let stmt = f.stmt(i);
            let mut names: Vec<&str> = stmt.named_variables();
            for (_, e) in stmt.expressions() {
                names.extend(e.variables());
            }
            names.iter().all(|n| env.var(n).is_some())
        }
        S::CalleeDefined(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            f.checked_exprs(i)
                .iter()
                .all(|e| e.calls().iter().all(|(callee, _)| env.function(callee).is_some()))
        }
        S::CallArityMatches(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            f.checked_exprs(i).iter().all(|e| {
                e.calls().iter().all(|(callee, args)| {
                    env.function(callee).is_none_or(|sig| sig.params.len() == args.len())
                })
            })
        }
        S::CallArgsMatch(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            f.checked_exprs(i).iter().all(|e| {
                e.calls().iter().all(|(callee, args)| match env.function(callee) {
                    Some(sig) if sig.params.len() == args.len() => {
                        sig.params.iter().zip(args.iter()).all(|(p, a)| {
                            infer_type(a, env).map_or(true, |t| p.accepts(&t))
                        })
                    }
                    _ => true,
                })
            })
        }
        S::ExprTyped(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            f.checked_exprs(i).iter().all(|e| {
                !matches!(
                    infer_type(e, env),
                    Err(TypeError::TypeMismatch { .. }
                        | TypeError::UnknownMember { .. }
                        | TypeError::NotAnLvalue(_))
                )
            })
        }
        S::FormatArgsMatch(name) => match f.stmt(lookup(b, name)).format() {
            Some((format, args)) => format_specifiers(format).len() == args.len(),
            None => true,
        },
        S::FormatTypesMatch(name) => {
            let i = lookup(b, name);
            let env = f.scopes.at(i);
            let stmt = f.stmt(i);
            let Some((format, args)) = stmt.format() else {
                return true;
            };
            let specs = format_specifiers(format);
            if specs.len() != args.len() {
                return true;
            }
            let input = reads_input(stmt);
            specs.iter().zip(args).all(|(spec, arg)| match infer_type(arg, env) {
                Err(_) => true,
                Ok(t) if input && !t.is_address() => true,
                Ok(t) if input => input_spec_ok(*spec, &t),
                Ok(t) => output_spec_ok(*spec, &t),
            })
        }
        S::NotRedeclared(name) => {
            let i = lookup(b, name);
            let Stmt::Declaration { name: declared, .. } = f.stmt(i) else {
                return true;
            };
            let parent = f.parent[i];
            if let Some(Stmt::FunctionDef { params, .. }) = parent.map(|p| f.stmt(p)) {
                if params.iter().any(|p| p.name == *declared) {
                    return false;
                }
            }
            let siblings = f.children(parent);
            let pos = siblings.iter().position(|&s| s == i).expect("block is its parent's child");
            let branch_start = siblings[..pos]
                .iter()
                .rposition(|&s| matches!(f.stmt(s), Stmt::Else))
                .map_or(0, |e| e + 1);
            !siblings[branch_start..pos].iter().any(|&s| {
                matches!(f.stmt(s), Stmt::Declaration { name, .. } if name == declared)
            })
        }
        S::Lvalue(r) => {
            let i = lookup(b, &r.binding);
            match r.attr.as_deref().and_then(|a| f.nodes[i].block.attr(a)) {
                Some(AttrValue::Expr(e)) => e.is_lvalue(),
                _ => true,
            }
        }
    }
}

fn relevance_bindings(f: &ProgramFacts, matchers: &[Matcher]) -> Vec<Binding> {
    fn extend(f: &ProgramFacts, matchers: &[Matcher], cur: &mut Binding, out: &mut Vec<Binding>) {
        let Some((m, rest)) = matchers.split_first() else {
            out.push(cur.clone());
            return;
        };
        for i in 0..f.nodes.len() {
            if !m.kind.is_empty() && !m.kind.contains(&f.kind(i)) {
                continue;
            }
            if m.preds.iter().all(|p| attr_pred(f, p, i, cur)) {
                cur.push((m.bind.clone(), i));
                extend(f, rest, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(f, matchers, &mut Vec::new(), &mut out);
    out
}

fn explanation(f: &ProgramFacts, b: &Binding) -> BTreeMap<String, String> {
    let mut data = BTreeMap::new();
    for (name, i) in b {
        let block = f.nodes[*i].block;
        data.insert(name.clone(), block.id.to_string());
        data.insert(format!("{name}.kind"), block.kind().to_string());
        for attr in attr_names(&block.stmt) {
            if let Some(text) = f.text(*i, attr) {
                data.insert(format!("{name}.{attr}"), text);
            }
            if let Some(t) = f.single_type(*i, attr) {
                data.insert(format!("{name}.{attr}:type"), t.to_string());
            }
        }
    }
    data
}

fn check_with(
    f: &ProgramFacts,
    c: &Constraint,
    ctx: &EvalContext,
) -> Vec<(Binding, bool)> {
    if !c.cr.tags.is_subset(ctx.tags) {
        return Vec::new();
    }
    relevance_bindings(f, &c.cr.matchers)
        .into_iter()
        .map(|b| {
            let ok = satisfied(f, &c.cs, &b);
            (b, ok)
        })
        .collect()
}

/// Every relevance binding of one constraint with its Cs outcome. The
/// enabled flag is not consulted here.
pub fn check_constraint(c: &Constraint, program: &Program, ctx: &EvalContext) -> Vec<BindingResult> {
    let f = ProgramFacts::new(program);
    check_with(&f, c, ctx)
        .into_iter()
        .map(|(b, satisfied)| BindingResult {
            binding: b
                .iter()
                .map(|(n, i)| (n.clone(), f.nodes[*i].block.id.clone()))
                .collect(),
            satisfied,
        })
        .collect()
}

/// All violations of the enabled constraints, ordered by constraint id and
/// then by the bound block ids.
pub fn evaluate_in(program: &Program, ctx: &EvalContext, kb: &KnowledgeBase) -> Vec<Violation> {
    let f = ProgramFacts::new(program);
    let mut out = Vec::new();
    for c in kb.constraints.iter().filter(|c| ctx.is_enabled(c)) {
        for (b, ok) in check_with(&f, c, ctx) {
            if ok {
                continue;
            }
            out.push(Violation {
                constraint_id: c.id.clone(),
                category: c.category,
                bindings: b
                    .iter()
                    .map(|(n, i)| (n.clone(), f.nodes[*i].block.id.clone()))
                    .collect(),
                binding_order: b.iter().map(|(_, i)| f.nodes[*i].block.id.clone()).collect(),
                explanation_data: explanation(&f, &b),
            });
        }
    }
    sort_violations(&mut out);
    out
}

pub fn sort_violations(v: &mut [Violation]) {
    v.sort_by(|a, b| {
        (&a.constraint_id, &a.binding_order).cmp(&(&b.constraint_id, &b.binding_order))
    });
}

pub fn evaluate(program: &Program, exercise: &Exercise, kb: &KnowledgeBase) -> Vec<Violation> {
    evaluate_in(program, &EvalContext::from(exercise), kb)
}
