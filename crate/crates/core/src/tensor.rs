//! Dense row-major tensors and network contraction.

use num_traits::Zero;
use nalgebra::ComplexField;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{real, to_f64, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<K> {
    shape: Vec<usize>,
    data: Vec<K>,
    labels: Option<Vec<String>>,
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Calls `f(offset)` for every multi-index of `shape` in row-major order, where
/// `offset` is the dot product of the index with `strides`.
pub(crate) fn for_each_offset(shape: &[usize], strides: &[usize], mut f: impl FnMut(usize)) {
    if shape.contains(&0) {
        return;
    }
    let n = shape.len();
    let mut idx = vec![0usize; n];
    let mut offset = 0usize;
    loop {
        f(offset);
        let mut k = n;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            offset += strides[k];
            if idx[k] < shape[k] {
                break;
            }
            offset -= strides[k] * shape[k];
            idx[k] = 0;
        }
    }
}

impl<K: Scalar> DenseTensor<K> {
    pub fn new(shape: Vec<usize>, data: Vec<K>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if shape.contains(&0) {
            return Err(Error::invalid("tensor dimensions must be positive"));
        }
        if size != data.len() {
            return Err(Error::mismatch(format!(
                "shape {:?} needs {} entries, got {}",
                shape,
                size,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("tensor entries must be finite"));
        }
        Ok(DenseTensor {
            shape,
            data,
            labels: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let size = shape.iter().product();
        DenseTensor {
            shape,
            data: vec![K::zero(); size],
            labels: None,
        }
    }

    pub fn scalar(x: K) -> Self {
        DenseTensor {
            shape: vec![],
            data: vec![x],
            labels: None,
        }
    }

    /// Fills a tensor from a function of the multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> K) -> Self {
        let size: usize = shape.iter().product();
        let mut data = Vec::with_capacity(size);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..size {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        DenseTensor {
            shape,
            data,
            labels: None,
        }
    }

    pub fn random<G: rand::Rng + ?Sized>(shape: Vec<usize>, rng: &mut G) -> Self {
        let size: usize = shape.iter().product();
        let data = (0..size).map(|_| K::gaussian(rng)).collect();
        DenseTensor {
            shape,
            data,
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.shape.len() {
            return Err(Error::mismatch("one label per leg is required"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[K] {
        &self.data
    }

    pub fn into_data(self) -> Vec<K> {
        self.data
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: &[usize]) -> K {
        let s = strides(&self.shape);
        self.data[idx.iter().zip(&s).map(|(i, s)| i * s).sum::<usize>()]
    }

    pub fn norm(&self) -> K::RealField {
        self.data
            .iter()
            .fold(K::RealField::zero(), |acc, x| acc + x.modulus_squared())
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn scale(mut self, s: K) -> Self {
        for x in &mut self.data {
            *x *= s;
        }
        self
    }

    pub fn map<L: Scalar>(&self, f: impl Fn(K) -> L) -> DenseTensor<L> {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f(x)).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Reorders legs: leg `k` of the result is leg `perm[k]` of `self`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let n = self.ndim();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid(format!("{perm:?} is not a permutation of {n} legs")));
        }
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return Ok(self.clone());
        }
        let src = strides(&self.shape);
        let shape: Vec<usize> = perm.iter().map(|&p| self.shape[p]).collect();
        let gather: Vec<usize> = perm.iter().map(|&p| src[p]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        for_each_offset(&shape, &gather, |o| data.push(self.data[o]));
        Ok(DenseTensor {
            shape,
            data,
            labels: self
                .labels
                .as_ref()
                .map(|l| perm.iter().map(|&p| l[p].clone()).collect()),
        })
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.data.len() {
            return Err(Error::mismatch(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape;
        self.labels = None;
        Ok(self)
    }

    /// Fixes leg `leg` to `index`, removing it.
    pub fn fix_leg(&self, leg: usize, index: usize) -> Result<Self> {
        if leg >= self.ndim() || index >= self.shape[leg] {
            return Err(Error::invalid("leg or index out of range"));
        }
        let s = strides(&self.shape);
        let mut shape = self.shape.clone();
        shape.remove(leg);
        let mut st = s.clone();
        st.remove(leg);
        let base = index * s[leg];
        let mut data = Vec::with_capacity(self.data.len() / self.shape[leg]);
        for_each_offset(&shape, &st, |o| data.push(self.data[base + o]));
        let labels = self.labels.as_ref().map(|l| {
            let mut l = l.clone();
            l.remove(leg);
            l
        });
        Ok(DenseTensor {
            shape,
            data,
            labels,
        })
    }

    /// Contracts leg `leg` with a vector, removing it.
    pub fn contract_vector(&self, leg: usize, v: &[K]) -> Result<Self> {
        if leg >= self.ndim() || v.len() != self.shape[leg] {
            return Err(Error::mismatch("vector length differs from leg dimension"));
        }
        let mut out: Option<DenseTensor<K>> = None;
        for (i, &c) in v.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let slice = self.fix_leg(leg, i)?;
            out = Some(match out {
                None => slice.scale(c),
                Some(mut acc) => {
                    for (a, b) in acc.data.iter_mut().zip(&slice.data) {
                        *a += *b * c;
                    }
                    acc
                }
            });
        }
        Ok(out.unwrap_or_else(|| {
            let mut shape = self.shape.clone();
            shape.remove(leg);
            DenseTensor::zeros(shape)
        }))
    }

    /// Matricization with the given row legs and column legs, each group
    /// flattened row-major in the listed order.
    pub fn matrix(&self, rows: &[usize], cols: &[usize]) -> Result<DMatrix<K>> {
        MatrixView::new(self.clone(), rows.to_vec(), cols.to_vec())?.to_matrix()
    }

    /// Builds a tensor from a matrix whose rows and columns are row-major
    /// flattenings of `row_shape` and `col_shape`.
    pub fn from_matrix(m: &DMatrix<K>, row_shape: &[usize], col_shape: &[usize]) -> Result<Self> {
        let (r, c) = (row_shape.iter().product::<usize>(), col_shape.iter().product::<usize>());
        if m.nrows() != r || m.ncols() != c {
            return Err(Error::mismatch("matrix size differs from the requested shapes"));
        }
        let mut shape = row_shape.to_vec();
        shape.extend_from_slice(col_shape);
        // Row-major data of m is column-major data of mᵀ.
        let data = m.transpose().as_slice().to_vec();
        DenseTensor::new(shape, data)
    }

    /// Tensor product; legs of `self` come first.
    pub fn outer(&self, other: &Self) -> Self {
        let mut data = Vec::with_capacity(self.data.len() * other.data.len());
        for &a in &self.data {
            data.extend(other.data.iter().map(|&b| a * b));
        }
        let mut shape = self.shape.clone();
        shape.extend_from_slice(&other.shape);
        DenseTensor {
            shape,
            data,
            labels: None,
        }
    }

    /// Sums over pairs of legs of the same tensor. `pairs` lists `(leg, leg)`;
    /// remaining legs keep their relative order.
    pub fn trace(&self, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = self.ndim();
        let mut used = vec![false; n];
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b || used[a] || used[b] {
                return Err(Error::invalid("invalid trace pairing"));
            }
            if self.shape[a] != self.shape[b] {
                return Err(Error::mismatch("traced legs differ in dimension"));
            }
            used[a] = true;
            used[b] = true;
        }
        let s = strides(&self.shape);
        let free: Vec<usize> = (0..n).filter(|&k| !used[k]).collect();
        let shape: Vec<usize> = free.iter().map(|&k| self.shape[k]).collect();
        let free_strides: Vec<usize> = free.iter().map(|&k| s[k]).collect();
        let trace_shape: Vec<usize> = pairs.iter().map(|&(a, _)| self.shape[a]).collect();
        let trace_strides: Vec<usize> = pairs.iter().map(|&(a, b)| s[a] + s[b]).collect();
        let mut inner = Vec::new();
        for_each_offset(&trace_shape, &trace_strides, |o| inner.push(o));
        let mut data = Vec::with_capacity(shape.iter().product());
        for_each_offset(&shape, &free_strides, |o| {
            let mut acc = K::zero();
            for &i in &inner {
                acc += self.data[o + i];
            }
            data.push(acc);
        });
        Ok(DenseTensor {
            shape,
            data,
            labels: None,
        })
    }

    /// Contracts legs `la[k]` of `self` with `lb[k]` of `other`. The result
    /// carries the free legs of `self` followed by those of `other`.
    pub fn contract_with(&self, la: &[usize], other: &Self, lb: &[usize]) -> Result<Self> {
        if la.len() != lb.len() {
            return Err(Error::mismatch("paired leg lists differ in length"));
        }
        for (&a, &b) in la.iter().zip(lb) {
            if a >= self.ndim() || b >= other.ndim() {
                return Err(Error::invalid("leg index out of range"));
            }
            if self.shape[a] != other.shape[b] {
                return Err(Error::mismatch(format!(
                    "paired legs have dimensions {} and {}",
                    self.shape[a], other.shape[b]
                )));
            }
        }
        let free_a: Vec<usize> = (0..self.ndim()).filter(|k| !la.contains(k)).collect();
        let free_b: Vec<usize> = (0..other.ndim()).filter(|k| !lb.contains(k)).collect();
        let pa: Vec<usize> = free_a.iter().chain(la).copied().collect();
        let pb: Vec<usize> = lb.iter().chain(&free_b).copied().collect();
        let a = self.permute(&pa)?;
        let b = other.permute(&pb)?;
        let m: usize = free_a.iter().map(|&k| self.shape[k]).product();
        let k: usize = la.iter().map(|&k| self.shape[k]).product();
        let n: usize = free_b.iter().map(|&k| other.shape[k]).product();
        // Row-major A (m×k) is column-major Aᵀ; Cᵀ = Bᵀ Aᵀ is column-major n×m,
        // i.e. row-major C.
        let at = DMatrix::from_vec(k, m, a.data);
        let bt = DMatrix::from_vec(n, k, b.data);
        let ct = bt * at;
        let mut shape: Vec<usize> = free_a.iter().map(|&k| self.shape[k]).collect();
        shape.extend(free_b.iter().map(|&k| other.shape[k]));
        Ok(DenseTensor {
            shape,
            data: ct.data.into(),
            labels: None,
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| to_f64((*a - *b).modulus()))
            .fold(0.0, f64::max)
    }
}

/// A leg of a tensor in a network: `(tensor index, leg index)`.
pub type LegRef = (usize, usize);

/// Contracts a network. Every pairing joins two legs of equal dimension; legs
/// may be paired within one tensor. Unpaired legs appear in the result ordered
/// by `(tensor index, leg index)`. The pairwise order is greedy by smallest
/// intermediate size and does not affect the value.
pub fn contract<K: Scalar>(
    network: &[DenseTensor<K>],
    pairings: &[(LegRef, LegRef)],
) -> Result<DenseTensor<K>> {
    if network.is_empty() {
        return Ok(DenseTensor::scalar(K::one()));
    }
    let mut partner: Vec<Vec<Option<LegRef>>> =
        network.iter().map(|t| vec![None; t.ndim()]).collect();
    for &(x, y) in pairings {
        for &(t, l) in &[x, y] {
            if t >= network.len() || l >= network[t].ndim() {
                return Err(Error::invalid(format!("leg ({t}, {l}) does not exist")));
            }
        }
        if x == y {
            return Err(Error::invalid(format!("leg {x:?} paired with itself")));
        }
        if network[x.0].shape[x.1] != network[y.0].shape[y.1] {
            return Err(Error::mismatch(format!(
                "legs {:?} and {:?} have dimensions {} and {}",
                x, y, network[x.0].shape[x.1], network[y.0].shape[y.1]
            )));
        }
        for (a, b) in [(x, y), (y, x)] {
            if partner[a.0][a.1].replace(b).is_some() {
                return Err(Error::invalid(format!("leg {a:?} paired twice")));
            }
        }
    }

    // Each live node: tensor plus the original leg carried by each of its legs.
    struct Node<K> {
        tensor: DenseTensor<K>,
        legs: Vec<LegRef>,
    }
    let mut nodes: Vec<Option<Node<K>>> = Vec::with_capacity(network.len());
    for (t, tensor) in network.iter().enumerate() {
        let legs: Vec<LegRef> = (0..tensor.ndim()).map(|l| (t, l)).collect();
        let self_pairs: Vec<(usize, usize)> = (0..tensor.ndim())
            .filter_map(|l| match partner[t][l] {
                Some((u, m)) if u == t && m > l => Some((l, m)),
                _ => None,
            })
            .collect();
        let node = if self_pairs.is_empty() {
            Node {
                tensor: tensor.clone(),
                legs,
            }
        } else {
            let traced = tensor.trace(&self_pairs)?;
            let kept = legs
                .into_iter()
                .filter(|&(_, l)| !self_pairs.iter().any(|&(a, b)| a == l || b == l))
                .collect();
            Node {
                tensor: traced,
                legs: kept,
            }
        };
        nodes.push(Some(node));
    }

    let pairs_between = |a: &Node<K>, b: &Node<K>| -> (Vec<usize>, Vec<usize>) {
        let mut la = Vec::new();
        let mut lb = Vec::new();
        for (i, &leg) in a.legs.iter().enumerate() {
            if let Some(p) = partner[leg.0][leg.1] {
                if let Some(j) = b.legs.iter().position(|&q| q == p) {
                    la.push(i);
                    lb.push(j);
                }
            }
        }
        (la, lb)
    };

    loop {
        let live: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].is_some()).collect();
        if live.len() == 1 {
            break;
        }
        let mut best: Option<(bool, u128, usize, usize)> = None;
        for (x, &i) in live.iter().enumerate() {
            for &j in &live[x + 1..] {
                let (a, b) = (nodes[i].as_ref().unwrap(), nodes[j].as_ref().unwrap());
                let (la, _) = pairs_between(a, b);
                let shared: u128 = la.iter().map(|&l| a.tensor.shape[l] as u128).product();
                let size = (a.tensor.len() as u128) * (b.tensor.len() as u128) / (shared * shared);
                let key = (la.is_empty(), size, i, j);
                if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                    best = Some(key);
                }
            }
        }
        let (_, _, i, j) = best.expect("at least two live nodes");
        let a = nodes[i].take().unwrap();
        let b = nodes[j].take().unwrap();
        let (la, lb) = pairs_between(&a, &b);
        let tensor = a.tensor.contract_with(&la, &b.tensor, &lb)?;
        let legs = a
            .legs
            .iter()
            .enumerate()
            .filter(|(k, _)| !la.contains(k))
            .map(|(_, &l)| l)
            .chain(
                b.legs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !lb.contains(k))
                    .map(|(_, &l)| l),
            )
            .collect();
        nodes[i] = Some(Node { tensor, legs });
    }
    let node = nodes.into_iter().flatten().next().unwrap();
    let mut order: Vec<usize> = (0..node.legs.len()).collect();
    order.sort_by_key(|&k| node.legs[k]);
    node.tensor.permute(&order)
}

/// Contracts a network by matching leg labels: every label shared by exactly
/// two legs is summed over. Free labels appear in the result in order of first
/// appearance.
pub fn contract_labeled<K: Scalar>(
    network: &[(DenseTensor<K>, Vec<&str>)],
) -> Result<(DenseTensor<K>, Vec<String>)> {
    let mut seen: std::collections::BTreeMap<&str, Vec<LegRef>> = Default::default();
    let mut order = Vec::new();
    for (t, (tensor, labels)) in network.iter().enumerate() {
        if labels.len() != tensor.ndim() {
            return Err(Error::mismatch("one label per leg is required"));
        }
        for (l, &label) in labels.iter().enumerate() {
            let entry = seen.entry(label).or_default();
            if entry.is_empty() {
                order.push(label);
            }
            entry.push((t, l));
        }
    }
    let mut pairings = Vec::new();
    let mut free = Vec::new();
    for label in order {
        match seen[label].as_slice() {
            [x] => free.push((*x, label.to_string())),
            [x, y] => pairings.push((*x, *y)),
            _ => return Err(Error::invalid(format!("label `{label}` used more than twice"))),
        }
    }
    let tensors: Vec<DenseTensor<K>> = network.iter().map(|(t, _)| t.clone()).collect();
    let result = contract(&tensors, &pairings)?;
    let mut sorted = free.clone();
    sorted.sort_by_key(|(leg, _)| *leg);
    let perm: Vec<usize> = free
        .iter()
        .map(|(leg, _)| sorted.iter().position(|(l, _)| l == leg).unwrap())
        .collect();
    let labels = free.into_iter().map(|(_, s)| s).collect();
    Ok((result.permute(&perm)?, labels))
}

/// A tensor with its legs split into a row group and a column group.
#[derive(Clone, Debug)]
pub struct MatrixView<K> {
    pub tensor: DenseTensor<K>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl<K: Scalar> MatrixView<K> {
    pub fn new(tensor: DenseTensor<K>, rows: Vec<usize>, cols: Vec<usize>) -> Result<Self> {
        let mut all: Vec<usize> = rows.iter().chain(&cols).copied().collect();
        all.sort_unstable();
        if all != (0..tensor.ndim()).collect::<Vec<_>>() {
            return Err(Error::invalid("row and column groups must cover every leg exactly once"));
        }
        Ok(MatrixView { tensor, rows, cols })
    }

    pub fn nrows(&self) -> usize {
        self.rows.iter().map(|&k| self.tensor.shape[k]).product()
    }

    pub fn ncols(&self) -> usize {
        self.cols.iter().map(|&k| self.tensor.shape[k]).product()
    }

    pub fn to_matrix(&self) -> Result<DMatrix<K>> {
        let perm: Vec<usize> = self.rows.iter().chain(&self.cols).copied().collect();
        let t = self.tensor.permute(&perm)?;
        Ok(DMatrix::from_row_slice(self.nrows(), self.ncols(), &t.data))
    }
}

/// Serialized tensor: shape plus `[re, im]` pairs in row-major order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorDocument {
    pub shape: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl<K: Scalar> From<&DenseTensor<K>> for TensorDocument {
    fn from(t: &DenseTensor<K>) -> Self {
        TensorDocument {
            shape: t.shape.clone(),
            entries: t
                .data
                .iter()
                .map(|&x| {
                    let (re, im) = x.parts();
                    [to_f64(re), to_f64(im)]
                })
                .collect(),
            labels: t.labels.clone(),
        }
    }
}

impl TensorDocument {
    pub fn to_tensor<K: Scalar>(&self) -> Result<DenseTensor<K>> {
        if !K::IS_COMPLEX && self.entries.iter().any(|e| e[1] != 0.0) {
            return Err(Error::invalid("complex entries in a real tensor"));
        }
        let data = self
            .entries
            .iter()
            .map(|e| K::from_parts(real(e[0]), real(e[1])))
            .collect();
        let t = DenseTensor::new(self.shape.clone(), data)?;
        match &self.labels {
            Some(l) => t.with_labels(l.clone()),
            None => Ok(t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex64;

    fn identity(d: usize) -> DenseTensor<C> {
        DenseTensor::from_fn(vec![d, d], |i| if i[0] == i[1] { C::new(1.0, 0.0) } else { C::new(0.0, 0.0) })
    }

    #[test]
    fn identity_times_vector() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = DenseTensor::<C>::random(vec![5], &mut rng);
        let r = contract(&[identity(5), v.clone()], &[((0, 1), (1, 0))]).unwrap();
        assert!(r.max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn maximally_entangled_pair_norm() {
        let d = 3;
        let pair = identity(d);
        let r = contract(&[pair.clone(), pair], &[((0, 0), (1, 0)), ((0, 1), (1, 1))]).unwrap();
        assert_eq!(r.shape(), &[] as &[usize]);
        assert!((r.data()[0] - C::new(d as f64, 0.0)).norm() < 1e-15);
        let traced = identity(d).trace(&[(0, 1)]).unwrap();
        assert!((traced.data()[0] - C::new(d as f64, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn permute_and_matrix() {
        let t = DenseTensor::<f64>::from_fn(vec![2, 3, 4], |i| (100 * i[0] + 10 * i[1] + i[2]) as f64);
        let p = t.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), 123.0);
        let m = t.matrix(&[1], &[0, 2]).unwrap();
        assert_eq!(m[(2, 4 + 1)], 121.0);
        let back = DenseTensor::from_matrix(&m, &[3], &[2, 4]).unwrap();
        assert_eq!(back.permute(&[1, 0, 2]).unwrap(), t);
        assert!(t.permute(&[0, 0, 1]).is_err());
    }

    #[test]
    fn fix_and_vector_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = DenseTensor::<C>::random(vec![2, 3, 2], &mut rng);
        let f = t.fix_leg(1, 2).unwrap();
        assert_eq!(f.get(&[1, 0]), t.get(&[1, 2, 0]));
        let v = vec![C::new(0.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)];
        assert!(t.contract_vector(1, &v).unwrap().max_abs_diff(&f) < 1e-15);
    }

    #[test]
    fn errors() {
        let a = DenseTensor::<f64>::zeros(vec![2, 3]);
        let b = DenseTensor::<f64>::zeros(vec![4]);
        assert!(matches!(contract(&[a.clone(), b], &[((0, 0), (1, 0))]), Err(Error::DimensionMismatch(_))));
        let c = DenseTensor::<f64>::zeros(vec![2]);
        assert!(contract(&[a.clone(), c.clone(), c], &[((0, 0), (1, 0)), ((0, 0), (2, 0))]).is_err());
        assert!(DenseTensor::<f64>::new(vec![2], vec![1.0, f64::NAN]).is_err());
        assert!(DenseTensor::<f64>::new(vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn labeled_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseTensor::<f64>::random(vec![2, 3], &mut rng);
        let b = DenseTensor::<f64>::random(vec![3, 4], &mut rng);
        let (r, labels) = contract_labeled(&[(b.clone(), vec!["k", "j"]), (a.clone(), vec!["i", "k"])]).unwrap();
        assert_eq!(labels, vec!["j", "i"]);
        let direct = a.contract_with(&[1], &b, &[0]).unwrap().permute(&[1, 0]).unwrap();
        assert!(r.max_abs_diff(&direct) < 1e-14);
    }

    #[test]
    fn document_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = DenseTensor::<C>::random(vec![2, 2, 3], &mut rng);
        let doc = TensorDocument::from(&t);
        let text = serde_json::to_string(&doc).unwrap();
        let back: TensorDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_tensor::<C>().unwrap(), t);
        assert!(back.to_tensor::<f64>().is_err());
    }
}
