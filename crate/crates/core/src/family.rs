//! Covariance families built from geodesics between anchor matrices.
//!
//! A [`GeodesicSegment`] is the one-parameter family `t ↦ φ_{A₁→A₂}(t)`,
//! defined for every real `t`. A [`ScaledFamily`] multiplies a matrix or a
//! segment by `αᵗ`. A [`FamilyTree`] composes pairwise geodesics recursively:
//! every internal node evaluates the geodesic between the evaluations of its
//! two children at its own parameter.
//!
//! Parameters of a tree are numbered by node height (distance to the deepest
//! leaf below it), ties broken left to right. For the unbalanced spine this
//! puts `t₁` at the deepest node; for balanced trees all parents of leaves
//! come first and the root parameter is last.

use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::manifold::{check_dims, pencil_decompose, PencilDecomposition, SpdMatrix};
use crate::scalar::Real;

/// One-parameter geodesic family through two anchors.
#[derive(Clone, Debug)]
pub struct GeodesicSegment<T: Real> {
    anchor1: SpdMatrix<T>,
    anchor2: SpdMatrix<T>,
    pencil: PencilDecomposition<T>,
}

impl<T: Real> GeodesicSegment<T> {
    pub fn new(anchor1: SpdMatrix<T>, anchor2: SpdMatrix<T>) -> Result<Self> {
        let pencil = pencil_decompose(&anchor1, &anchor2)?;
        Ok(Self {
            anchor1,
            anchor2,
            pencil,
        })
    }

    pub fn anchor1(&self) -> &SpdMatrix<T> {
        &self.anchor1
    }

    pub fn anchor2(&self) -> &SpdMatrix<T> {
        &self.anchor2
    }

    pub fn pencil(&self) -> &PencilDecomposition<T> {
        &self.pencil
    }

    pub fn dim(&self) -> usize {
        self.anchor1.dim()
    }

    /// `d(A₁, A₂)`.
    pub fn length(&self) -> T {
        self.pencil.distance()
    }

    pub fn eval(&self, t: T) -> SpdMatrix<T> {
        self.pencil.point(t)
    }

    /// Same image with the anchors swapped: `φ_{A₂→A₁}(1 − t)`.
    pub fn reversed(&self) -> Result<Self> {
        Self::new(self.anchor2.clone(), self.anchor1.clone())
    }

    /// Segment through the inverted anchors; its points are the inverses of
    /// this segment's points.
    pub fn inverted(&self) -> Result<Self> {
        Self::new(self.anchor1.inverse(), self.anchor2.inverse())
    }
}

/// `φ(t) = A₁^{1/2} U Λᵗ Uᵀ A₁^{1/2}`.
pub fn eval_segment<T: Real>(seg: &GeodesicSegment<T>, t: T) -> SpdMatrix<T> {
    seg.eval(t)
}

/// Base of a [`ScaledFamily`].
#[derive(Clone, Debug)]
pub enum ScaledBase<T: Real> {
    Matrix(SpdMatrix<T>),
    Segment(GeodesicSegment<T>),
}

/// `αᵗ` times a matrix (one parameter) or times a segment (two parameters).
#[derive(Clone, Debug)]
pub struct ScaledFamily<T: Real> {
    base: ScaledBase<T>,
    alpha: T,
}

impl<T: Real> ScaledFamily<T> {
    pub fn new(base: ScaledBase<T>, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(GeoError::InvalidArgument(format!(
                "scaling constant must be positive, got {alpha}"
            )));
        }
        Ok(Self { base, alpha })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn base(&self) -> &ScaledBase<T> {
        &self.base
    }

    pub fn eval(&self, t_scale: T, t_inner: Option<T>) -> Result<SpdMatrix<T>> {
        let inner = match (&self.base, t_inner) {
            (ScaledBase::Matrix(a), None) => a.clone(),
            (ScaledBase::Segment(seg), Some(t)) => seg.eval(t),
            (ScaledBase::Matrix(_), Some(_)) => {
                return Err(GeoError::InvalidArgument(
                    "inner parameter given for a matrix base".into(),
                ))
            }
            (ScaledBase::Segment(_), None) => {
                return Err(GeoError::InvalidArgument(
                    "inner parameter required for a segment base".into(),
                ))
            }
        };
        inner.scaled(self.alpha.powf(t_scale))
    }
}

pub fn eval_scaled<T: Real>(
    fam: &ScaledFamily<T>,
    t_scale: T,
    t_inner: Option<T>,
) -> Result<SpdMatrix<T>> {
    fam.eval(t_scale, t_inner)
}

/// Tree shape requested from [`build_tree`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeShape {
    /// `φ_{A₁→A₂→…→A_k}`: a spine, each new anchor joined at the top.
    Unbalanced,
    /// `φ_{(A₁→A₂)→(A₃→A₄)}`: full binary tree, power-of-two anchor count.
    Balanced,
    /// Explicit nesting such as `((1,2),3)` with one-based anchor indices.
    Mixed(String),
}

impl TreeShape {
    /// Parses `unbalanced`, `balanced`, or a nested-parentheses string.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "unbalanced" => Ok(Self::Unbalanced),
            "balanced" => Ok(Self::Balanced),
            other if other.starts_with('(') => Ok(Self::Mixed(other.to_string())),
            other => Err(GeoError::InvalidShape(format!("unknown shape {other:?}"))),
        }
    }
}

impl fmt::Display for TreeShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unbalanced => f.write_str("unbalanced"),
            Self::Balanced => f.write_str("balanced"),
            Self::Mixed(s) => f.write_str(s),
        }
    }
}

/// Effect of a single parameter on the whole family, see
/// [`FamilyTree::coordinate_role`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordinateRole {
    /// every ancestor passes this branch through unchanged (0 on a left
    /// branch, 1 on a right branch), so the family traces the node's geodesic
    Geodesic,
    /// some ancestor sits at the endpoint that discards this branch
    Inactive,
    /// the coordinate curve is not a geodesic
    General,
}

type CacheEntry<T> = (Vec<u64>, Arc<PencilDecomposition<T>>);

/// Single-entry pencil cache keyed by the parameters of the node's subtrees.
#[derive(Debug)]
struct NodeCache<T: Real>(Mutex<Option<CacheEntry<T>>>);

impl<T: Real> Clone for NodeCache<T> {
    fn clone(&self) -> Self {
        Self(Mutex::new(None))
    }
}

#[derive(Clone, Debug)]
enum TreeNode<T: Real> {
    Leaf {
        anchor: usize,
    },
    Node {
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
        param: usize,
        /// parameters of all internal nodes strictly below this one
        below: Vec<usize>,
        cache: NodeCache<T>,
    },
}

/// Skeleton used while building, before parameters are numbered.
enum Shape {
    Leaf(usize),
    Node(Box<Shape>, Box<Shape>),
}

impl Shape {
    fn height(&self) -> usize {
        match self {
            Shape::Leaf(_) => 0,
            Shape::Node(l, r) => 1 + l.height().max(r.height()),
        }
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            Shape::Leaf(i) => out.push(*i),
            Shape::Node(l, r) => {
                l.collect_leaves(out);
                r.collect_leaves(out);
            }
        }
    }

    /// (height, visit index) of every internal node in pre-order.
    fn internal_keys(&self, out: &mut Vec<usize>) {
        if let Shape::Node(l, r) = self {
            out.push(self.height());
            l.internal_keys(out);
            r.internal_keys(out);
        }
    }
}

/// p-parameter covariance family: a binary tree of geodesics over `p + 1` anchors.
#[derive(Clone, Debug)]
pub struct FamilyTree<T: Real> {
    anchors: Vec<SpdMatrix<T>>,
    root: TreeNode<T>,
    shape: TreeShape,
    num_params: usize,
    /// nesting depth of each parameter's node (root = 0)
    depth: Vec<usize>,
}

impl<T: Real> FamilyTree<T> {
    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn num_anchors(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &[SpdMatrix<T>] {
        &self.anchors
    }

    pub fn shape(&self) -> &TreeShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].dim()
    }

    /// Index of the root parameter (always the last one).
    pub fn root_param(&self) -> usize {
        self.num_params - 1
    }

    /// Depth of the node carrying parameter `j` (root is 0).
    pub fn param_depth(&self, j: usize) -> usize {
        self.depth[j]
    }

    /// Nested-parentheses rendering with one-based anchor indices and the
    /// parameter of every internal node, e.g. `((1,2)t1,3)t2`.
    pub fn describe(&self) -> String {
        fn go<T: Real>(n: &TreeNode<T>, out: &mut String) {
            match n {
                TreeNode::Leaf { anchor } => out.push_str(&(anchor + 1).to_string()),
                TreeNode::Node {
                    left, right, param, ..
                } => {
                    out.push('(');
                    go(left, out);
                    out.push(',');
                    go(right, out);
                    out.push(')');
                    out.push_str(&format!("t{}", param + 1));
                }
            }
        }
        let mut s = String::new();
        go(&self.root, &mut s);
        s
    }

    pub fn eval(&self, params: &[T]) -> Result<SpdMatrix<T>> {
        check_params(self.num_params, params)?;
        self.eval_node(&self.root, params)
    }

    fn eval_node(&self, node: &TreeNode<T>, params: &[T]) -> Result<SpdMatrix<T>> {
        match node {
            TreeNode::Leaf { anchor } => Ok(self.anchors[*anchor].clone()),
            TreeNode::Node { param, .. } => {
                Ok(self.node_pencil(node, params)?.point(params[*param]))
            }
        }
    }

    fn node_pencil(&self, node: &TreeNode<T>, params: &[T]) -> Result<Arc<PencilDecomposition<T>>> {
        let TreeNode::Node {
            left,
            right,
            below,
            cache,
            ..
        } = node
        else {
            unreachable!("leaves carry no pencil")
        };
        let key: Vec<u64> = below
            .iter()
            .map(|&j| params[j].as_f64().to_bits())
            .collect();
        if let Some((k, pd)) = cache.0.lock().expect("cache lock").as_ref() {
            if *k == key {
                return Ok(Arc::clone(pd));
            }
        }
        let l = self.eval_node(left, params)?;
        let r = self.eval_node(right, params)?;
        let pd = Arc::new(pencil_decompose(&l, &r)?);
        *cache.0.lock().expect("cache lock") = Some((key, Arc::clone(&pd)));
        Ok(pd)
    }

    fn find_node(&self, j: usize) -> &TreeNode<T> {
        fn go<T: Real>(n: &TreeNode<T>, j: usize) -> Option<&TreeNode<T>> {
            match n {
                TreeNode::Leaf { .. } => None,
                TreeNode::Node {
                    left, right, param, ..
                } => {
                    if *param == j {
                        Some(n)
                    } else {
                        go(left, j).or_else(|| go(right, j))
                    }
                }
            }
        }
        go(&self.root, j).expect("parameter index in range")
    }

    /// How the family responds to moving parameter `j` alone, given the
    /// values of its ancestors.
    pub fn coordinate_role(&self, params: &[T], j: usize) -> CoordinateRole {
        fn go<T: Real>(n: &TreeNode<T>, params: &[T], j: usize) -> Option<CoordinateRole> {
            let TreeNode::Node {
                left, right, param, ..
            } = n
            else {
                return None;
            };
            if *param == j {
                return Some(CoordinateRole::Geodesic);
            }
            let t = params[*param];
            let (inner, keep, drop) = match go(left, params, j) {
                Some(r) => (r, T::zero(), T::one()),
                None => (go(right, params, j)?, T::one(), T::zero()),
            };
            Some(match inner {
                CoordinateRole::Inactive => CoordinateRole::Inactive,
                _ if t == drop => CoordinateRole::Inactive,
                CoordinateRole::Geodesic if t == keep => CoordinateRole::Geodesic,
                _ => CoordinateRole::General,
            })
        }
        go(&self.root, params, j).unwrap_or(CoordinateRole::Inactive)
    }

    /// Geodesic segment between the two children of the node carrying
    /// parameter `j`, at the given values of the other parameters.
    ///
    /// For the root parameter this is exactly the whole family restricted to
    /// coordinate `j`; for deeper parameters it is only the local geodesic.
    pub fn node_segment(&self, params: &[T], j: usize) -> Result<GeodesicSegment<T>> {
        check_params(self.num_params, params)?;
        if j >= self.num_params {
            return Err(GeoError::InvalidArgument(format!(
                "no parameter t{}",
                j + 1
            )));
        }
        let TreeNode::Node { left, right, .. } = self.find_node(j) else {
            unreachable!()
        };
        GeodesicSegment::new(
            self.eval_node(left, params)?,
            self.eval_node(right, params)?,
        )
    }
}

fn check_params<T: Real>(expected: usize, params: &[T]) -> Result<()> {
    if params.len() != expected {
        return Err(GeoError::ParamLength {
            expected,
            found: params.len(),
        });
    }
    if params.iter().any(|t| !t.is_finite()) {
        return Err(GeoError::InvalidArgument("non-finite parameter".into()));
    }
    Ok(())
}

fn parse_mixed(s: &str) -> Result<Shape> {
    let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
    let mut pos = 0;
    let shape = parse_expr(&chars, &mut pos)?;
    if pos != chars.len() {
        return Err(GeoError::InvalidShape(format!("trailing input in {s:?}")));
    }
    Ok(shape)
}

fn parse_expr(c: &[char], pos: &mut usize) -> Result<Shape> {
    let bad = |msg: &str| GeoError::InvalidShape(msg.to_string());
    match c.get(*pos) {
        Some('(') => {
            *pos += 1;
            let left = parse_expr(c, pos)?;
            if c.get(*pos) != Some(&',') {
                return Err(bad("expected ','"));
            }
            *pos += 1;
            let right = parse_expr(c, pos)?;
            if c.get(*pos) != Some(&')') {
                return Err(bad("expected ')'"));
            }
            *pos += 1;
            Ok(Shape::Node(Box::new(left), Box::new(right)))
        }
        Some(d) if d.is_ascii_digit() => {
            let start = *pos;
            while c.get(*pos).is_some_and(|d| d.is_ascii_digit()) {
                *pos += 1;
            }
            let text: String = c[start..*pos].iter().collect();
            let idx: usize = text.parse().map_err(|_| bad("bad anchor index"))?;
            if idx == 0 {
                return Err(bad("anchor indices are one-based"));
            }
            Ok(Shape::Leaf(idx - 1))
        }
        _ => Err(bad("expected '(' or an anchor index")),
    }
}

fn balanced_shape(lo: usize, hi: usize) -> Shape {
    if hi - lo == 1 {
        Shape::Leaf(lo)
    } else {
        let mid = lo + (hi - lo) / 2;
        Shape::Node(
            Box::new(balanced_shape(lo, mid)),
            Box::new(balanced_shape(mid, hi)),
        )
    }
}

/// Builds a tree over `anchors` (at least two, sharing one dimension).
pub fn build_tree<T: Real>(anchors: Vec<SpdMatrix<T>>, shape: TreeShape) -> Result<FamilyTree<T>> {
    let k = anchors.len();
    if k < 2 {
        return Err(GeoError::InvalidShape(format!(
            "need at least 2 anchors, got {k}"
        )));
    }
    let n = anchors[0].dim();
    for a in &anchors[1..] {
        check_dims(n, a.dim())?;
    }
    let skeleton = match &shape {
        TreeShape::Unbalanced => (1..k).fold(Shape::Leaf(0), |acc, i| {
            Shape::Node(Box::new(acc), Box::new(Shape::Leaf(i)))
        }),
        TreeShape::Balanced => {
            if !k.is_power_of_two() {
                return Err(GeoError::InvalidShape(format!(
                    "balanced tree needs a power-of-two anchor count, got {k}"
                )));
            }
            balanced_shape(0, k)
        }
        TreeShape::Mixed(s) => {
            let sk = parse_mixed(s)?;
            let mut leaves = Vec::new();
            sk.collect_leaves(&mut leaves);
            let mut sorted = leaves.clone();
            sorted.sort_unstable();
            if sorted != (0..k).collect::<Vec<_>>() {
                return Err(GeoError::InvalidShape(format!(
                    "shape {s:?} must use each of the {k} anchors exactly once"
                )));
            }
            sk
        }
    };

    // number internal nodes by (height, pre-order position)
    let mut heights = Vec::new();
    skeleton.internal_keys(&mut heights);
    let mut order: Vec<usize> = (0..heights.len()).collect();
    order.sort_by_key(|&i| (heights[i], i));
    let mut param_of_visit = vec![0; heights.len()];
    for (param, &visit) in order.iter().enumerate() {
        param_of_visit[visit] = param;
    }

    let mut visit = 0;
    let mut depth = vec![0; heights.len()];
    let root = finalize(&skeleton, &param_of_visit, &mut visit, 0, &mut depth);
    Ok(FamilyTree {
        anchors,
        root,
        shape,
        num_params: k - 1,
        depth,
    })
}

fn finalize<T: Real>(
    s: &Shape,
    param_of_visit: &[usize],
    visit: &mut usize,
    level: usize,
    depth: &mut [usize],
) -> TreeNode<T> {
    match s {
        Shape::Leaf(i) => TreeNode::Leaf { anchor: *i },
        Shape::Node(l, r) => {
            let param = param_of_visit[*visit];
            *visit += 1;
            depth[param] = level;
            let left = finalize(l, param_of_visit, visit, level + 1, depth);
            let right = finalize(r, param_of_visit, visit, level + 1, depth);
            let mut below = Vec::new();
            collect_params(&left, &mut below);
            collect_params(&right, &mut below);
            TreeNode::Node {
                left: Box::new(left),
                right: Box::new(right),
                param,
                below,
                cache: NodeCache(Mutex::new(None)),
            }
        }
    }
}

fn collect_params<T: Real>(n: &TreeNode<T>, out: &mut Vec<usize>) {
    if let TreeNode::Node {
        left, right, param, ..
    } = n
    {
        out.push(*param);
        collect_params(left, out);
        collect_params(right, out);
    }
}

pub fn eval_tree<T: Real>(tree: &FamilyTree<T>, params: &[T]) -> Result<SpdMatrix<T>> {
    tree.eval(params)
}
