//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Graph`] records operations on 2-D values; [`Graph::backward`] walks
//! the record in reverse and returns one gradient per registered parameter.
//! Attention over a batch of B frames uses a packed layout: per-frame
//! context matrices sit side by side as a `rows x (B * c)` matrix, so
//! column `b * c + j` is context slot `j` of frame `b`.

use ndarray::{s, Array2, Axis, Zip};

use crate::error::{Error, Result};

/// Parameter values and their accumulated gradients.
#[derive(Debug, Clone, Default)]
pub struct ParameterTape {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
    grads: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

impl ParamId {
    pub fn from_index(i: usize) -> Self {
        Self(i)
    }

    pub fn index(&self) -> usize {
        self.0
    }
}

impl ParameterTape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.grads.push(Array2::zeros(value.raw_dim()));
        self.values.push(value);
        self.names.push(name.into());
        ParamId(self.values.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.values
    }

    pub fn grad(&self, id: ParamId) -> &Array2<f64> {
        &self.grads[id.0]
    }

    pub fn grads(&self) -> &[Array2<f64>] {
        &self.grads
    }

    pub fn grads_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.grads
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        for g in self.grads.iter_mut() {
            g.fill(0.0);
        }
    }

    pub fn accumulate(&mut self, grads: &Gradients) {
        for (g, d) in self.grads.iter_mut().zip(&grads.0) {
            if let Some(d) = d {
                *g += d;
            }
        }
    }
}

/// Per-parameter gradients from one backward pass; `None` where a parameter
/// did not take part.
#[derive(Debug, Clone)]
pub struct Gradients(Vec<Option<Array2<f64>>>);

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.0.get(id.0).and_then(|g| g.as_ref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    AddRowBias(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Square(Var),
    Relu(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    Mean(Var),
    ContextScores { q: Var, k: Var, context: usize },
    ScaleColumns { v: Var, a: Var },
    ContextMajor { x: Var, context: usize },
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Array2<f64>>,
    needs_grad: bool,
}

/// Records a forward computation against a parameter tape.
#[derive(Debug)]
pub struct Graph<'t> {
    tape: &'t ParameterTape,
    nodes: Vec<Node>,
}

fn dim_err(what: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Dimension(format!("{what}: {a:?} vs {b:?}"))
}

fn add_into(slot: &mut Option<Array2<f64>>, delta: Array2<f64>) {
    match slot {
        Some(g) => *g += &delta,
        None => *slot = Some(delta),
    }
}

impl<'t> Graph<'t> {
    pub fn new(tape: &'t ParameterTape) -> Self {
        Self {
            tape,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match &self.nodes[v.0].op {
            Op::Param(i) => &self.tape.values[*i],
            _ => self.nodes[v.0].value.as_ref().expect("computed value"),
        }
    }

    fn push(&mut self, op: Op, value: Array2<f64>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(Op::Constant, value, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            op: Op::Param(id.0),
            value: None,
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.ncols() != y.nrows() {
            return Err(dim_err("matmul", x.dim(), y.dim()));
        }
        let v = x.dot(y);
        let g = self.grad_of(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), v, g))
    }

    /// Adds a 1 x n row to every row of an m x n matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.nrows() != 1 || bv.ncols() != xv.ncols() {
            return Err(dim_err("row bias", xv.dim(), bv.dim()));
        }
        let v = xv + bv;
        let g = self.grad_of(&[x, bias]);
        Ok(self.push(Op::AddRowBias(x, bias), v, g))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(dim_err("add", x.dim(), y.dim()));
        }
        let v = x + y;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(Op::Add(a, b), v, g))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.dim() != y.dim() {
            return Err(dim_err("sub", x.dim(), y.dim()));
        }
        let v = x - y;
        let g = self.grad_of(&[a, b]);
        Ok(self.push(Op::Sub(a, b), v, g))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let v = self.value(a) * k;
        let g = self.grad_of(&[a]);
        self.push(Op::Scale(a, k), v, g)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        let g = self.grad_of(&[a]);
        self.push(Op::Square(a), v, g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        let g = self.grad_of(&[a]);
        self.push(Op::Relu(a), v, g)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(crate::network::sigmoid);
        let g = self.grad_of(&[a]);
        self.push(Op::Sigmoid(a), v, g)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, x| m.max(*x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        let g = self.grad_of(&[a]);
        self.push(Op::SoftmaxRows(a), v, g)
    }

    /// Mean of all entries as a 1 x 1 value.
    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a).mean().ok_or(Error::EmptyInput)?;
        let g = self.grad_of(&[a]);
        Ok(self.push(Op::Mean(a), Array2::from_elem((1, 1), m), g))
    }

    /// `S[b, j] = sum_r Q[r, b*c + j] * K[r, b]` for Q of shape d x (B*c) and
    /// K of shape d x B; the result is B x c.
    pub fn context_scores(&mut self, q: Var, k: Var, context: usize) -> Result<Var> {
        let (qv, kv) = (self.value(q), self.value(k));
        let batch = kv.ncols();
        if qv.nrows() != kv.nrows() || qv.ncols() != batch * context {
            return Err(dim_err("context scores", qv.dim(), kv.dim()));
        }
        let mut s = Array2::zeros((batch, context));
        for b in 0..batch {
            let kb = kv.column(b);
            let qb = qv.slice(s![.., b * context..(b + 1) * context]);
            s.row_mut(b).assign(&qb.t().dot(&kb));
        }
        let g = self.grad_of(&[q, k]);
        Ok(self.push(Op::ContextScores { q, k, context }, s, g))
    }

    /// `Y[r, b*c + j] = V[r, b*c + j] * A[b, j]`.
    pub fn scale_columns(&mut self, v: Var, a: Var) -> Result<Var> {
        let (vv, av) = (self.value(v), self.value(a));
        if vv.ncols() != av.len() {
            return Err(dim_err("scale columns", vv.dim(), av.dim()));
        }
        let flat = av.iter().cloned().collect::<Vec<_>>();
        let mut y = vv.clone();
        for (mut col, w) in y.axis_iter_mut(Axis(1)).zip(flat) {
            col *= w;
        }
        let g = self.grad_of(&[v, a]);
        Ok(self.push(Op::ScaleColumns { v, a }, y, g))
    }

    /// Repacks d x (B*c) into B x (c*d) with slot `j` at features
    /// `j*d .. (j+1)*d`.
    pub fn context_major(&mut self, x: Var, context: usize) -> Result<Var> {
        let xv = self.value(x);
        let (d, cols) = xv.dim();
        if context == 0 || cols % context != 0 {
            return Err(dim_err("context major", xv.dim(), (context, 0)));
        }
        let batch = cols / context;
        let mut out = Array2::zeros((batch, context * d));
        for b in 0..batch {
            for j in 0..context {
                out.slice_mut(s![b, j * d..(j + 1) * d])
                    .assign(&xv.column(b * context + j));
            }
        }
        let g = self.grad_of(&[x]);
        Ok(self.push(Op::ContextMajor { x, context }, out, g))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views)
            .map_err(|e| Error::Dimension(format!("concatenation: {e}")))?;
        let g = self.grad_of(parts);
        Ok(self.push(Op::ConcatCols(parts.to_vec()), v, g))
    }

    /// Gradients of the 1 x 1 value `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::NoForward);
        }
        if self.value(loss).dim() != (1, 1) {
            return Err(Error::Dimension(format!(
                "backward needs a scalar, got {:?}",
                self.value(loss).dim()
            )));
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.tape.len()];
        adj[loss.0] = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(dz) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let wants = |v: &Var| self.nodes[v.0].needs_grad;
            match &node.op {
                Op::Constant => {}
                Op::Param(p) => add_into(&mut grads[*p], dz),
                Op::MatMul(a, b) => {
                    if wants(a) {
                        add_into(&mut adj[a.0], dz.dot(&self.value(*b).t()));
                    }
                    if wants(b) {
                        add_into(&mut adj[b.0], self.value(*a).t().dot(&dz));
                    }
                }
                Op::AddRowBias(x, bias) => {
                    if wants(bias) {
                        add_into(&mut adj[bias.0], dz.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if wants(x) {
                        add_into(&mut adj[x.0], dz);
                    }
                }
                Op::Add(a, b) => {
                    if wants(b) {
                        add_into(&mut adj[b.0], dz.clone());
                    }
                    if wants(a) {
                        add_into(&mut adj[a.0], dz);
                    }
                }
                Op::Sub(a, b) => {
                    if wants(b) {
                        add_into(&mut adj[b.0], -&dz);
                    }
                    if wants(a) {
                        add_into(&mut adj[a.0], dz);
                    }
                }
                Op::Scale(a, k) => add_into(&mut adj[a.0], dz * *k),
                Op::Square(a) => {
                    let x = self.value(*a);
                    add_into(&mut adj[a.0], dz * x * 2.0);
                }
                Op::Relu(a) => {
                    let mut d = dz;
                    Zip::from(&mut d).and(self.value(*a)).for_each(|g, &x| {
                        if x <= 0.0 {
                            *g = 0.0
                        }
                    });
                    add_into(&mut adj[a.0], d);
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap();
                    add_into(&mut adj[a.0], dz * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::SoftmaxRows(a) => {
                    let y = node.value.as_ref().unwrap();
                    let mut d = dz;
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot = drow.dot(&yrow);
                        Zip::from(&mut drow)
                            .and(&yrow)
                            .for_each(|g, &s| *g = s * (*g - dot));
                    }
                    add_into(&mut adj[a.0], d);
                }
                Op::Mean(a) => {
                    let x = self.value(*a);
                    let k = dz[[0, 0]] / x.len() as f64;
                    add_into(&mut adj[a.0], Array2::from_elem(x.raw_dim(), k));
                }
                Op::ContextScores { q, k, context } => {
                    let c = *context;
                    let (qv, kv) = (self.value(*q), self.value(*k));
                    let batch = kv.ncols();
                    if wants(q) {
                        let mut dq = Array2::zeros(qv.raw_dim());
                        for b in 0..batch {
                            for j in 0..c {
                                let w = dz[[b, j]];
                                dq.column_mut(b * c + j).scaled_add(w, &kv.column(b));
                            }
                        }
                        add_into(&mut adj[q.0], dq);
                    }
                    if wants(k) {
                        let mut dk = Array2::zeros(kv.raw_dim());
                        for b in 0..batch {
                            let qb = qv.slice(s![.., b * c..(b + 1) * c]);
                            dk.column_mut(b).assign(&qb.dot(&dz.row(b)));
                        }
                        add_into(&mut adj[k.0], dk);
                    }
                }
                Op::ScaleColumns { v, a } => {
                    let (vv, av) = (self.value(*v), self.value(*a));
                    let flat: Vec<f64> = av.iter().cloned().collect();
                    if wants(a) {
                        let sums: Vec<f64> = (0..vv.ncols())
                            .map(|col| dz.column(col).dot(&vv.column(col)))
                            .collect();
                        let da =
                            Array2::from_shape_vec(av.raw_dim(), sums).expect("attention shape");
                        add_into(&mut adj[a.0], da);
                    }
                    if wants(v) {
                        let mut dv = dz;
                        for (mut col, w) in dv.axis_iter_mut(Axis(1)).zip(flat) {
                            col *= w;
                        }
                        add_into(&mut adj[v.0], dv);
                    }
                }
                Op::ContextMajor { x, context } => {
                    let c = *context;
                    let xv = self.value(*x);
                    let d = xv.nrows();
                    let mut dx = Array2::zeros(xv.raw_dim());
                    for b in 0..dz.nrows() {
                        for j in 0..c {
                            dx.column_mut(b * c + j)
                                .assign(&dz.slice(s![b, j * d..(j + 1) * d]));
                        }
                    }
                    add_into(&mut adj[x.0], dx);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        if wants(p) {
                            add_into(&mut adj[p.0], dz.slice(s![.., at..at + w]).to_owned());
                        }
                        at += w;
                    }
                }
            }
        }
        for g in grads.iter().flatten() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite gradient".into()));
            }
        }
        Ok(Gradients(grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn square_at_three() {
        let mut tape = ParameterTape::new();
        let w = tape.register("w", array![[3.0]]);
        let mut g = Graph::new(&tape);
        let x = g.param(w);
        let y = g.square(x);
        let grads = g.backward(y).unwrap();
        assert_eq!(grads.get(w).unwrap()[[0, 0]], 6.0);
    }

    #[test]
    fn backward_without_forward() {
        let tape = ParameterTape::new();
        let g = Graph::new(&tape);
        assert!(matches!(g.backward(Var(0)), Err(Error::NoForward)));
    }

    #[test]
    fn accumulate_and_zero() {
        let mut tape = ParameterTape::new();
        let w = tape.register("w", array![[2.0, -1.0]]);
        for _ in 0..2 {
            let grads = {
                let mut g = Graph::new(&tape);
                let x = g.param(w);
                let s = g.square(x);
                let m = g.mean(s).unwrap();
                g.backward(m).unwrap()
            };
            tape.accumulate(&grads);
        }
        assert_eq!(tape.grad(w), &array![[4.0, -2.0]]);
        tape.zero_grad();
        assert_eq!(tape.grad(w), &array![[0.0, 0.0]]);
    }

    fn rand_mat(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((r, c), || rng.gen_range(-1.0..1.0))
    }

    /// Builds a loss touching every op and checks each parameter gradient
    /// against central differences of the same graph.
    fn check_all_ops(seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, batch, c, f) = (3, 2, 3, 4);
        let mut tape = ParameterTape::new();
        let wq = tape.register("wq", rand_mat(d, f, &mut rng));
        let wk = tape.register("wk", rand_mat(d, f, &mut rng));
        let wv = tape.register("wv", rand_mat(f, f, &mut rng));
        let w1 = tape.register("w1", rand_mat(f * c + c, 5, &mut rng));
        let b1 = tape.register("b1", rand_mat(1, 5, &mut rng));
        let w2 = tape.register("w2", rand_mat(5, 1, &mut rng));
        let cmat = rand_mat(f, batch * c, &mut rng);
        let ymat = rand_mat(f, batch, &mut rng);
        let target = rand_mat(batch, 5, &mut rng);
        let zt = rand_mat(batch, 1, &mut rng);

        let build = |tape: &ParameterTape| -> f64 {
            let g = Graph::new(tape);
            let (g, l) = forward(g, &[wq, wk, wv, w1, b1, w2], &cmat, &ymat, &target, &zt, c);
            let v = g.value(l)[[0, 0]];
            v
        };
        let grads = {
            let g = Graph::new(&tape);
            let (g, l) = forward(g, &[wq, wk, wv, w1, b1, w2], &cmat, &ymat, &target, &zt, c);
            g.backward(l).unwrap()
        };
        let h = 1e-6;
        let mut worst = 0.0f64;
        for id in tape.ids().collect::<Vec<_>>() {
            let analytic = grads.get(id).unwrap().clone();
            for idx in 0..analytic.len() {
                let (r, col) = (idx / analytic.ncols(), idx % analytic.ncols());
                let orig = tape.values()[id.index()][[r, col]];
                tape.values_mut()[id.index()][[r, col]] = orig + h;
                let up = build(&tape);
                tape.values_mut()[id.index()][[r, col]] = orig - h;
                let down = build(&tape);
                tape.values_mut()[id.index()][[r, col]] = orig;
                let num = (up - down) / (2.0 * h);
                let a = analytic[[r, col]];
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        worst
    }

    #[allow(clippy::too_many_arguments)]
    fn forward<'t>(
        mut g: Graph<'t>,
        ids: &[ParamId],
        cmat: &Array2<f64>,
        ymat: &Array2<f64>,
        target: &Array2<f64>,
        zt: &Array2<f64>,
        c: usize,
    ) -> (Graph<'t>, Var) {
        let [wq, wk, wv, w1, b1, w2] =
            [ids[0], ids[1], ids[2], ids[3], ids[4], ids[5]].map(|i| g.param(i));
        let cm = g.constant(cmat.clone());
        let ym = g.constant(ymat.clone());
        let q = g.matmul(wq, cm).unwrap();
        let k = g.matmul(wk, ym).unwrap();
        let s = g.context_scores(q, k, c).unwrap();
        let s = g.scale(s, 0.7);
        let a = g.softmax_rows(s);
        let v = g.matmul(wv, cm).unwrap();
        let y = g.scale_columns(v, a).unwrap();
        let feat = g.context_major(y, c).unwrap();
        let feat = g.concat_cols(&[feat, a]).unwrap();
        let h = g.matmul(feat, w1).unwrap();
        let h = g.add_row_bias(h, b1).unwrap();
        let h = g.relu(h);
        let t = g.constant(target.clone());
        let e = g.sub(h, t).unwrap();
        let e = g.square(e);
        let l1 = g.mean(e).unwrap();
        let z = g.matmul(h, w2).unwrap();
        let z = g.sigmoid(z);
        let zc = g.constant(zt.clone());
        let ez = g.sub(z, zc).unwrap();
        let ez = g.square(ez);
        let l2 = g.mean(ez).unwrap();
        let l = g.add(l1, l2).unwrap();
        (g, l)
    }

    #[test]
    fn every_op_matches_central_differences() {
        for seed in 0..4 {
            let worst = check_all_ops(seed);
            assert!(worst < 1e-5, "seed {seed}: worst relative error {worst}");
        }
    }

    #[test]
    fn context_major_matches_layout() {
        let tape = ParameterTape::new();
        let mut g = Graph::new(&tape);
        // d = 2, B = 1, c = 2: columns are slots.
        let x = g.constant(array![[1.0, 3.0], [2.0, 4.0]]);
        let y = g.context_major(x, 2).unwrap();
        assert_eq!(g.value(y), &array![[1.0, 2.0, 3.0, 4.0]]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn softmax_rows_sum_to_one(vals in proptest::collection::vec(-30.0f64..30.0, 12)) {
            let tape = ParameterTape::new();
            let mut g = Graph::new(&tape);
            let x = g.constant(Array2::from_shape_vec((3, 4), vals).unwrap());
            let y = g.softmax_rows(x);
            for row in g.value(y).rows() {
                prop_assert!((row.sum() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn linear_loss_gradient_is_input(vals in proptest::collection::vec(-5.0f64..5.0, 6)) {
            // d/dW mean(x W) for x 2x3, W 3x1 is column means of x.
            let mut tape = ParameterTape::new();
            let w = tape.register("w", Array2::ones((3, 1)));
            let xv = Array2::from_shape_vec((2, 3), vals).unwrap();
            let mut g = Graph::new(&tape);
            let x = g.constant(xv.clone());
            let p = g.param(w);
            let y = g.matmul(x, p).unwrap();
            let m = g.mean(y).unwrap();
            let grads = g.backward(m).unwrap();
            let expect = xv.mean_axis(Axis(0)).unwrap();
            for (a, b) in grads.get(w).unwrap().iter().zip(expect.iter()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }
}
