//! Smooth maps `F: R^n -> R^m` with value, gradient and Hessian access.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{finite_difference_jet, BoundExpression, Expression, Jet, Node};

type JetFn = dyn Fn(&[f64]) -> Result<Vec<Jet>> + Send + Sync;
type ValueFn = dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
enum Source {
    Expressions(Vec<BoundExpression>),
    Analytic {
        jets: Arc<JetFn>,
        values: Arc<ValueFn>,
    },
    /// Values only; derivatives by central differences.
    BlackBox { values: Arc<ValueFn>, step: Option<f64> },
}

/// A vector-valued map with second-order derivative access.
///
/// Derivatives come from, in order of preference, exact forward
/// differentiation of parsed expressions, user-registered analytic jets, or
/// central finite differences of a black-box evaluator.
#[derive(Clone)]
pub struct SmoothMap {
    inputs: Vec<String>,
    outputs: Vec<String>,
    source: Source,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.source {
            Source::Expressions(_) => "expressions",
            Source::Analytic { .. } => "analytic",
            Source::BlackBox { .. } => "black-box",
        };
        f.debug_struct("SmoothMap")
            .field("inputs", &self.inputs)
            .field("outputs", &self.outputs)
            .field("source", &kind)
            .finish()
    }
}

fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{}", i + 1)).collect()
}

impl SmoothMap {
    /// One output per `(name, expression)`, all over the same inputs.
    pub fn from_expressions<S: AsRef<str>>(
        inputs: &[S],
        outputs: Vec<(String, Expression)>,
    ) -> Result<SmoothMap> {
        let mut names = Vec::with_capacity(outputs.len());
        let mut bound = Vec::with_capacity(outputs.len());
        for (name, e) in outputs {
            bound.push(e.bind(inputs)?);
            names.push(name);
        }
        Ok(SmoothMap {
            inputs: inputs.iter().map(|s| s.as_ref().to_owned()).collect(),
            outputs: names,
            source: Source::Expressions(bound),
        })
    }

    /// Parses each source text; outputs are named `f1, f2, ...`.
    pub fn parse<S: AsRef<str>>(inputs: &[S], sources: &[&str]) -> Result<SmoothMap> {
        let exprs = sources
            .iter()
            .enumerate()
            .map(|(i, s)| Ok((format!("f{}", i + 1), Expression::parse_declared(s, inputs)?)))
            .collect::<Result<Vec<_>>>()?;
        SmoothMap::from_expressions(inputs, exprs)
    }

    /// A map with user-supplied exact jets.
    pub fn analytic<J, V>(n: usize, m: usize, jets: J, values: V) -> SmoothMap
    where
        J: Fn(&[f64]) -> Result<Vec<Jet>> + Send + Sync + 'static,
        V: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        SmoothMap {
            inputs: default_names("x", n),
            outputs: default_names("f", m),
            source: Source::Analytic {
                jets: Arc::new(jets),
                values: Arc::new(values),
            },
        }
    }

    /// A map known only through its values. `step = None` selects the
    /// per-coordinate default steps of [`finite_difference_jet`].
    pub fn black_box<V>(n: usize, m: usize, step: Option<f64>, values: V) -> SmoothMap
    where
        V: Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        SmoothMap {
            inputs: default_names("x", n),
            outputs: default_names("f", m),
            source: Source::BlackBox {
                values: Arc::new(values),
                step,
            },
        }
    }

    pub fn with_names(mut self, inputs: Vec<String>, outputs: Vec<String>) -> Result<SmoothMap> {
        if inputs.len() != self.inputs.len() || outputs.len() != self.outputs.len() {
            return Err(Error::InvalidConfig("renaming must keep the map's shape".into()));
        }
        if let Source::Expressions(_) = self.source {
            return Err(Error::InvalidConfig(
                "expression maps take their input names from binding".into(),
            ));
        }
        self.inputs = inputs;
        self.outputs = outputs;
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn output_names(&self) -> &[String] {
        &self.outputs
    }

    /// Output expressions as ASTs, when the map is expression-backed.
    pub fn expressions(&self) -> Option<Vec<Node>> {
        match &self.source {
            Source::Expressions(b) => Some(b.iter().map(BoundExpression::to_node).collect()),
            _ => None,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs.len() {
            return Err(Error::Dimension {
                context: "map input",
                expected: self.inputs.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let v = match &self.source {
            Source::Expressions(b) => b.iter().map(|e| e.eval(x).map_err(Error::from)).collect(),
            Source::Analytic { values, .. } | Source::BlackBox { values, .. } => values(x),
        }?;
        if v.len() != self.outputs.len() {
            return Err(Error::Dimension {
                context: "map output",
                expected: self.outputs.len(),
                found: v.len(),
            });
        }
        Ok(v)
    }

    /// One jet per output at `x`.
    pub fn jets(&self, x: &[f64]) -> Result<Vec<Jet>> {
        self.check_point(x)?;
        let jets = match &self.source {
            Source::Expressions(b) => b
                .iter()
                .map(|e| e.jet(x).map_err(Error::from))
                .collect::<Result<Vec<_>>>()?,
            Source::Analytic { jets, .. } => {
                let js = jets(x)?;
                for j in &js {
                    Jet::from_parts(j.value, j.gradient.clone(), j.hessian.clone())
                        .map_err(Error::MalformedJet)?;
                    if j.dim() != x.len() {
                        return Err(Error::MalformedJet(format!(
                            "gradient length {} for {} inputs",
                            j.dim(),
                            x.len()
                        )));
                    }
                }
                js
            }
            Source::BlackBox { values, step } => (0..self.outputs.len())
                .map(|k| {
                    finite_difference_jet(
                        |p: &[f64]| -> Result<f64> {
                            let v = values(p)?;
                            v.get(k).copied().ok_or(Error::Dimension {
                                context: "map output",
                                expected: k + 1,
                                found: v.len(),
                            })
                        },
                        x,
                        *step,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        };
        if jets.len() != self.outputs.len() {
            return Err(Error::Dimension {
                context: "map output",
                expected: self.outputs.len(),
                found: jets.len(),
            });
        }
        Ok(jets)
    }

    /// Central-difference jets of this map's values, whatever its source.
    pub fn finite_difference_jets(&self, x: &[f64], step: Option<f64>) -> Result<Vec<Jet>> {
        self.check_point(x)?;
        (0..self.outputs.len())
            .map(|k| finite_difference_jet(|p: &[f64]| self.eval(p).map(|v| v[k]), x, step))
            .collect()
    }

    /// Jacobian (`m x n`) at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let jets = self.jets(x)?;
        Ok(jacobian_of(&jets, x.len()))
    }

    /// The scalar map made of output `k`.
    pub fn component(&self, k: usize) -> Result<SmoothMap> {
        if k >= self.outputs.len() {
            return Err(Error::Dimension {
                context: "map component",
                expected: self.outputs.len(),
                found: k + 1,
            });
        }
        let outputs = vec![self.outputs[k].clone()];
        let source = match &self.source {
            Source::Expressions(b) => Source::Expressions(vec![b[k].clone()]),
            Source::Analytic { jets, values } => {
                let (jets, values) = (jets.clone(), values.clone());
                Source::Analytic {
                    jets: Arc::new(move |x: &[f64]| Ok(vec![jets(x)?.swap_remove(k)])),
                    values: Arc::new(move |x: &[f64]| Ok(vec![values(x)?[k]])),
                }
            }
            Source::BlackBox { values, step } => {
                let values = values.clone();
                Source::BlackBox {
                    values: Arc::new(move |x: &[f64]| Ok(vec![values(x)?[k]])),
                    step: *step,
                }
            }
        };
        Ok(SmoothMap {
            inputs: self.inputs.clone(),
            outputs,
            source,
        })
    }

    /// `outer ∘ inner`. Expression maps compose by substituting ASTs, so the
    /// result is differentiated afresh; other maps compose their jets with
    /// the second-order chain rule.
    pub fn compose(outer: &SmoothMap, inner: &SmoothMap) -> Result<SmoothMap> {
        if outer.input_dim() != inner.output_dim() {
            return Err(Error::Dimension {
                context: "composition",
                expected: inner.output_dim(),
                found: outer.input_dim(),
            });
        }
        if let (Some(outer_nodes), Some(inner_nodes)) = (outer.expressions(), inner.expressions())
        {
            let subst = |name: &str| {
                outer
                    .inputs
                    .iter()
                    .position(|s| s == name)
                    .map(|i| inner_nodes[i].clone())
            };
            let outputs = outer
                .outputs
                .iter()
                .zip(outer_nodes)
                .map(|(name, node)| (name.clone(), Expression::from_node(node.substitute(&subst))))
                .collect();
            return SmoothMap::from_expressions(&inner.inputs, outputs);
        }
        let (o, i) = (outer.clone(), inner.clone());
        let (o2, i2) = (outer.clone(), inner.clone());
        let map = SmoothMap::analytic(
            inner.input_dim(),
            outer.output_dim(),
            move |x: &[f64]| {
                let inner_jets = i.jets(x)?;
                let u: Vec<f64> = inner_jets.iter().map(|j| j.value).collect();
                let outer_jets = o.jets(&u)?;
                Ok(outer_jets
                    .iter()
                    .map(|g| chain_jets(g, &inner_jets))
                    .collect())
            },
            move |x: &[f64]| o2.eval(&i2.eval(x)?),
        );
        map.with_names(inner.inputs.clone(), outer.outputs.clone())
    }
}

pub(crate) fn jacobian_of(jets: &[Jet], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(jets.len(), n, |k, i| jets[k].gradient[i])
}

/// Second-order chain rule: jet of `g(f_1, ..., f_m)` from the jet of `g`
/// (over `u`) and the jets of the `f_j`.
fn chain_jets(g: &Jet, inner: &[Jet]) -> Jet {
    let n = inner.first().map_or(0, Jet::dim);
    let m = inner.len();
    let jf = jacobian_of(inner, n);
    let gradient = jf.transpose() * &g.gradient;
    let mut hessian = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut v = 0.0;
            for j in 0..m {
                v += g.gradient[j] * inner[j].hessian[(a, b)];
                for l in 0..m {
                    v += jf[(j, a)] * g.hessian[(j, l)] * jf[(l, b)];
                }
            }
            hessian[(a, b)] = v;
            hessian[(b, a)] = v;
        }
    }
    let mut kinks = g.kinks.clone();
    for j in inner {
        kinks.extend(j.kinks.iter().cloned());
    }
    Jet {
        value: g.value,
        gradient,
        hessian,
        kinks,
    }
}
