//! Exhaustive reference checker. Every tuple of blocks is tried against
//! every rule, scopes are rebuilt from ancestor chains, and nothing from
//! the evaluator's indexing is reused.

use std::collections::BTreeSet;
use std::sync::Arc;

use tutor_core::codec::RuleOverride;
use tutor_core::constraints::{AttrPred, Constraint, KnowledgeBase, Ref, Satisfaction, Scope, TypeClass};
use tutor_core::program::{
    infer_type, AttrValue, Block, BlockKind, DataType, Expr, FileOpKind, Globals, Program, Stmt,
    TypeEnv, TypeError,
};

struct Node<'p> {
    block: &'p Block,
    ancestors: Vec<usize>,
    earlier_siblings: Vec<usize>,
}

pub struct Oracle<'p> {
    nodes: Vec<Node<'p>>,
    globals: Arc<Globals>,
}

type Tuple = Vec<(String, usize)>;

fn flatten<'p>(blocks: &'p [Block], ancestors: &[usize], out: &mut Vec<Node<'p>>) {
    let mut seen = Vec::new();
    for b in blocks {
        let me = out.len();
        out.push(Node {
            block: b,
            ancestors: ancestors.to_vec(),
            earlier_siblings: seen.clone(),
        });
        seen.push(me);
        let mut inner = ancestors.to_vec();
        inner.push(me);
        flatten(&b.children, &inner, out);
    }
}

fn class_ok(class: TypeClass, t: &DataType) -> bool {
    let decayed = match t {
        DataType::ArrayOf(inner, _) => DataType::PointerTo(inner.clone()),
        other => other.clone(),
    };
    match class {
        TypeClass::Int => *t == DataType::Int,
        TypeClass::Float => *t == DataType::Float,
        TypeClass::Char => *t == DataType::Char,
        TypeClass::Void => *t == DataType::Void,
        TypeClass::Numeric => matches!(t, DataType::Int | DataType::Float | DataType::Char),
        TypeClass::Integral => matches!(t, DataType::Int | DataType::Char),
        TypeClass::Pointer => matches!(t, DataType::PointerTo(_)),
        TypeClass::Address => matches!(decayed, DataType::PointerTo(_)),
        TypeClass::Array => matches!(t, DataType::ArrayOf(..)),
        TypeClass::Struct => matches!(t, DataType::StructRef(_)),
        TypeClass::File => *t == DataType::FileHandle,
        TypeClass::Scalar => !matches!(t, DataType::StructRef(_) | DataType::Void),
        TypeClass::String => decayed == DataType::PointerTo(Box::new(DataType::Char)),
    }
}

fn specifiers(format: &str) -> Vec<char> {
    let chars: Vec<char> = format.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        if chars[k] == '%' {
            if let Some(&c) = chars.get(k + 1) {
                if c != '%' {
                    out.push(c);
                }
            }
            k += 2;
        } else {
            k += 1;
        }
    }
    out
}

fn calls_in(e: &Expr) -> Vec<(String, Vec<Expr>)> {
    let mut out = Vec::new();
    e.walk(&mut |x| {
        if let Expr::Call(n, a) = x {
            out.push((n.clone(), a.clone()));
        }
    });
    out
}

pub fn enabled(c: &Constraint, overrides: &[RuleOverride]) -> bool {
    overrides
        .iter()
        .filter(|o| o.id == c.id)
        .last()
        .map_or(c.enabled, |o| o.enabled)
}

impl<'p> Oracle<'p> {
    pub fn new(program: &'p Program) -> Self {
        let mut nodes = Vec::new();
        flatten(&program.blocks, &[], &mut nodes);
        Oracle {
            nodes,
            globals: Arc::new(Globals::for_program(program)),
        }
    }

    fn stmt(&self, i: usize) -> &'p Stmt {
        &self.nodes[i].block.stmt
    }

    fn kind(&self, i: usize) -> BlockKind {
        self.stmt(i).kind()
    }

    /// Variables visible just before block `i`.
    fn env(&self, i: usize) -> TypeEnv {
        let mut env = TypeEnv::with_globals(self.globals.clone());
        let mut chain = self.nodes[i].ancestors.clone();
        chain.push(i);
        for (level, &n) in chain.iter().enumerate() {
            let parent = level.checked_sub(1).map(|l| chain[l]);
            if let Some(Stmt::FunctionDef { params, .. }) = parent.map(|p| self.stmt(p)) {
                for p in params {
                    env.declare(&p.name, p.ty.clone());
                }
            }
            let before = &self.nodes[n].earlier_siblings;
            let start = match parent.map(|p| self.stmt(p)) {
                Some(Stmt::If { .. }) => before
                    .iter()
                    .rposition(|&s| matches!(self.stmt(s), Stmt::Else))
                    .map_or(0, |k| k + 1),
                _ => 0,
            };
            for &s in &before[start..] {
                if let Stmt::Declaration { name, ty, .. } = self.stmt(s) {
                    env.declare(name, ty.clone());
                }
            }
        }
        env
    }

    fn attr(&self, i: usize, a: &str) -> Option<AttrValue<'p>> {
        self.nodes[i].block.attr(a)
    }

    fn types_of(&self, i: usize, a: &str) -> Vec<DataType> {
        let env = self.env(i);
        match self.attr(i, a) {
            Some(AttrValue::Type(t)) => vec![t.into_owned()],
            Some(AttrValue::Expr(e)) => infer_type(e, &env).ok().into_iter().collect(),
            Some(AttrValue::Exprs(es)) => es.iter().filter_map(|e| infer_type(e, &env).ok()).collect(),
            Some(AttrValue::Ident(n)) => match self.stmt(i) {
                Stmt::Declaration { ty, .. } => vec![ty.clone()],
                Stmt::ForLoop { .. } | Stmt::FileOp(_) => env.var(n).cloned().into_iter().collect(),
                _ => vec![],
            },
            _ => vec![],
        }
    }

    fn single(&self, i: usize, a: &str) -> Option<DataType> {
        if let Some(AttrValue::Exprs(_)) = self.attr(i, a) {
            return None;
        }
        let ts = self.types_of(i, a);
        if ts.len() == 1 {
            ts.into_iter().next()
        } else {
            None
        }
    }

    fn present(&self, i: usize, a: &str) -> bool {
        match self.attr(i, a) {
            None => false,
            Some(AttrValue::Exprs(v)) => !v.is_empty(),
            Some(AttrValue::Params(v)) => !v.is_empty(),
            Some(_) => true,
        }
    }

    fn text(&self, i: usize, a: &str) -> Option<String> {
        self.attr(i, a).map(|v| v.text())
    }

    fn bound(t: &Tuple, name: &str) -> usize {
        t.iter().find(|(n, _)| n == name).unwrap().1
    }

    fn ref_type(&self, t: &Tuple, r: &Ref) -> Option<DataType> {
        let a = r.attr.as_deref()?;
        self.single(Self::bound(t, &r.binding), a)
    }

    fn pred(&self, p: &AttrPred, i: usize, t: &Tuple) -> bool {
        match p {
            AttrPred::Present(a) => self.present(i, a),
            AttrPred::Absent(a) => !self.present(i, a),
            AttrPred::Equals { attr, value } => self.text(i, attr) == Some(value.clone()),
            AttrPred::SameAs { attr, reference } => {
                let j = Self::bound(t, &reference.binding);
                match reference.attr.as_deref().and_then(|a| self.text(j, a)) {
                    Some(x) => self.text(i, attr) == Some(x),
                    None => false,
                }
            }
            AttrPred::Contains { attr, node } => self
                .stmt(i)
                .expressions()
                .into_iter()
                .filter(|(a, _)| attr == "*" || a == attr)
                .any(|(_, e)| {
                    let mut hit = false;
                    e.walk(&mut |x| hit |= x.node_kind() == *node);
                    hit
                }),
            AttrPred::TypeIs { attr, class } => {
                let ts = self.types_of(i, attr);
                !ts.is_empty() && ts.iter().all(|x| class_ok(*class, x))
            }
            AttrPred::Is(ks) => ks.contains(&self.kind(i)),
            AttrPred::Inside(ks) => self.nodes[i].ancestors.iter().any(|&a| ks.contains(&self.kind(a))),
            AttrPred::InsideBinding(b) => self.nodes[i].ancestors.contains(&Self::bound(t, b)),
            AttrPred::Parent(ks) => self.nodes[i]
                .ancestors
                .last()
                .is_some_and(|&a| ks.contains(&self.kind(a))),
            AttrPred::TopLevel(want) => self.nodes[i].ancestors.is_empty() == *want,
            AttrPred::Not(q) => !self.pred(q, i, t),
            AttrPred::Any(qs) => qs.iter().any(|q| self.pred(q, i, t)),
        }
    }

    fn in_scope(&self, scope: &Scope, i: usize, t: &Tuple) -> bool {
        match scope {
            Scope::Anywhere => true,
            Scope::Within(b) => self.nodes[i].ancestors.contains(&Self::bound(t, b)),
            Scope::Before(b) => {
                let a = Self::bound(t, b);
                i < a && !self.nodes[a].ancestors.contains(&i)
            }
            Scope::After(b) => {
                let a = Self::bound(t, b);
                i > a && !self.nodes[i].ancestors.contains(&a)
            }
        }
    }

    fn count(&self, kinds: &[BlockKind], scope: &Scope, preds: &[AttrPred], t: &Tuple) -> usize {
        let mut n = 0;
        for i in 0..self.nodes.len() {
            if self.in_scope(scope, i, t)
                && (kinds.is_empty() || kinds.contains(&self.kind(i)))
                && preds.iter().all(|p| self.pred(p, i, t))
            {
                n += 1;
            }
        }
        n
    }

    fn checked(&self, i: usize) -> Vec<Expr> {
        if let Stmt::FunctionCall { callee, args } = self.stmt(i) {
            return vec![Expr::Call(callee.clone(), args.clone())];
        }
        self.stmt(i).expressions().into_iter().map(|(_, e)| e.clone()).collect()
    }

    fn sat(&self, cs: &Satisfaction, t: &Tuple) -> bool {
        use Satisfaction as S;
        match cs {
            S::All(xs) => xs.iter().all(|x| self.sat(x, t)),
            S::Any(xs) => xs.iter().any(|x| self.sat(x, t)),
            S::Not(x) => !self.sat(x, t),
            S::Exists(q) => self.count(&q.kind, &q.scope, &q.preds, t) >= 1,
            S::CountAtLeast(q) => self.count(&q.kind, &q.scope, &q.preds, t) >= q.n,
            S::TypeEquals(l, r) => match (self.ref_type(t, l), self.ref_type(t, r)) {
                (Some(a), Some(b)) => a.equivalent(&b),
                _ => true,
            },
            S::TypeAccepts(l, r) => match (self.ref_type(t, l), self.ref_type(t, r)) {
                (Some(a), Some(b)) => a.accepts(&b),
                _ => true,
            },
            S::TypeIs { reference, class } => match &reference.attr {
                None => true,
                Some(a) => self
                    .types_of(Self::bound(t, &reference.binding), a)
                    .iter()
                    .all(|x| class_ok(*class, x)),
            },
            S::AttrEquals { reference, value } => {
                let i = Self::bound(t, &reference.binding);
                reference.attr.as_deref().and_then(|a| self.text(i, a)) == Some(value.clone())
            }
            S::Holds { binding, preds } => {
                let i = Self::bound(t, binding);
                preds.iter().all(|p| self.pred(p, i, t))
            }
            S::Present(r) => match &r.attr {
                None => true,
                Some(a) => self.present(Self::bound(t, &r.binding), a),
            },
            S::DeclaredBeforeUse(b) => {
                let i = Self::bound(t, b);
                let env = self.env(i);
                let stmt = self.stmt(i);
                let mut names: Vec<String> = stmt.named_variables().iter().map(|s| s.to_string()).collect();
                for (_, e) in stmt.expressions() {
                    e.walk(&mut |x| {
                        if let Expr::Var(n) = x {
                            names.push(n.clone());
                        }
                    });
                }
                names.iter().all(|n| env.var(n).is_some())
            }
            S::CalleeDefined(b) => {
                let i = Self::bound(t, b);
                let env = self.env(i);
                self.checked(i)
                    .iter()
                    .flat_map(calls_in)
                    .all(|(c, _)| env.function(&c).is_some())
            }
            S::CallArityMatches(b) => {
                let i = Self::bound(t, b);
                let env = self.env(i);
                self.checked(i).iter().flat_map(calls_in).all(|(c, args)| match env.function(&c) {
                    Some(sig) => sig.params.len() == args.len(),
                    None => true,
                })
            }
            S::CallArgsMatch(b) => {
                let i = Self::bound(t, b);
                let env = self.env(i);
                self.checked(i).iter().flat_map(calls_in).all(|(c, args)| {
                    let Some(sig) = env.function(&c) else { return true };
                    if sig.params.len() != args.len() {
                        return true;
                    }
                    sig.params.iter().zip(&args).all(|(p, a)| match infer_type(a, &env) {
                        Ok(at) => p.accepts(&at),
                        Err(_) => true,
                    })
                })
            }
            S::ExprTyped(b) => {
                let i = Self::bound(t, b);
                let env = self.env(i);
                self.checked(i).iter().all(|e| match infer_type(e, &env) {
                    Err(TypeError::TypeMismatch { .. })
                    | Err(TypeError::UnknownMember { .. })
                    | Err(TypeError::NotAnLvalue(_)) => false,
                    _ => true,
                })
            }
            S::FormatArgsMatch(b) => match self.stmt(Self::bound(t, b)).format() {
                None => true,
                Some((f, args)) => specifiers(f).len() == args.len(),
            },
            S::FormatTypesMatch(b) => {
                let i = Self::bound(t, b);
                let stmt = self.stmt(i);
                let Some((f, args)) = stmt.format() else { return true };
                let specs = specifiers(f);
                if specs.len() != args.len() {
                    return true;
                }
                let input = matches!(stmt, Stmt::Input { .. })
                    || matches!(stmt, Stmt::FileOp(op) if op.op == FileOpKind::Read);
                let env = self.env(i);
                let int = DataType::Int;
                let flt = DataType::Float;
                let chr = DataType::Char;
                specs.iter().zip(args).all(|(s, a)| {
                    let Ok(ty) = infer_type(a, &env) else { return true };
                    if input {
                        if !class_ok(TypeClass::Address, &ty) {
                            return true;
                        }
                        let pointee = match ty {
                            DataType::PointerTo(x) => Some(*x),
                            DataType::ArrayOf(x, _) => Some(*x),
                            _ => None,
                        };
                        match s {
                            'd' => pointee == Some(int.clone()),
                            'f' => pointee == Some(flt.clone()),
                            'c' | 's' => pointee == Some(chr.clone()),
                            _ => false,
                        }
                    } else {
                        match s {
                            'd' | 'c' => class_ok(TypeClass::Integral, &ty),
                            'f' => ty == flt,
                            's' => class_ok(TypeClass::String, &ty),
                            _ => false,
                        }
                    }
                })
            }
            S::NotRedeclared(b) => {
                let i = Self::bound(t, b);
                let Stmt::Declaration { name, .. } = self.stmt(i) else { return true };
                if let Some(&p) = self.nodes[i].ancestors.last() {
                    if let Stmt::FunctionDef { params, .. } = self.stmt(p) {
                        if params.iter().any(|q| &q.name == name) {
                            return false;
                        }
                    }
                }
                let before = &self.nodes[i].earlier_siblings;
                let start = before
                    .iter()
                    .rposition(|&s| matches!(self.stmt(s), Stmt::Else))
                    .map_or(0, |k| k + 1);
                !before[start..]
                    .iter()
                    .any(|&s| matches!(self.stmt(s), Stmt::Declaration { name: n, .. } if n == name))
            }
            S::Lvalue(r) => match r.attr.as_deref().and_then(|a| self.attr(Self::bound(t, &r.binding), a)) {
                Some(AttrValue::Expr(e)) => matches!(
                    e,
                    Expr::Var(_) | Expr::Deref(_) | Expr::Index(..) | Expr::Member { .. }
                ),
                _ => true,
            },
        }
    }

    /// Every (binding, satisfied) pair of one rule, found by trying all
    /// n^k tuples of blocks in lexicographic order.
    pub fn check(&self, c: &Constraint, tags: &BTreeSet<String>) -> Vec<(Vec<(String, String)>, bool)> {
        if !c.cr.tags.iter().all(|x| tags.contains(x)) {
            return Vec::new();
        }
        let k = c.cr.matchers.len();
        let n = self.nodes.len();
        let mut out = Vec::new();
        if k > 0 && n == 0 {
            return out;
        }
        let mut digits = vec![0usize; k];
        loop {
            let mut tuple: Tuple = Vec::new();
            let mut ok = true;
            for (m, &i) in c.cr.matchers.iter().zip(&digits) {
                if !(m.kind.is_empty() || m.kind.contains(&self.kind(i)))
                    || !m.preds.iter().all(|p| self.pred(p, i, &tuple))
                {
                    ok = false;
                    break;
                }
                tuple.push((m.bind.clone(), i));
            }
            if ok {
                let named = tuple
                    .iter()
                    .map(|(b, i)| (b.clone(), self.nodes[*i].block.id.0.clone()))
                    .collect();
                out.push((named, self.sat(&c.cs, &tuple)));
            }
            let mut pos = k;
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < n {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// (rule id, bound block ids in matcher order) for every failing binding,
    /// sorted the same way as the evaluator's contract requires.
    pub fn violations(
        &self,
        kb: &KnowledgeBase,
        tags: &BTreeSet<String>,
        overrides: &[RuleOverride],
    ) -> Vec<(String, Vec<String>)> {
        let mut out = Vec::new();
        for c in kb.constraints.iter().filter(|c| enabled(c, overrides)) {
            for (binding, ok) in self.check(c, tags) {
                if !ok {
                    out.push((c.id.clone(), binding.into_iter().map(|(_, id)| id).collect()));
                }
            }
        }
        out.sort();
        out
    }
}
