//! Multi-head attention restricted to the edges of an [`InteractionGraph`],
//! wrapped in a post-norm transformer block.

use serde::{Deserialize, Serialize};

use super::interaction::InteractionGraph;
use super::params::{Bound, ParamStore};
use crate::error::{Error, Result};
use crate::rng::SeedSequence;
use crate::tensor::{Mode, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttentionSettings {
    pub heads: usize,
    pub dropout: f64,
    pub attention_dropout: f64,
}

/// Registers the block's parameters under `prefix`. The feed-forward width
/// is twice the model width.
pub fn init_attention_params(p: &mut ParamStore, prefix: &str, dim: usize, seed: u64) {
    let ff = 2 * dim;
    for w in ["wq", "wk", "wv", "wo"] {
        p.init_glorot(&format!("{prefix}.{w}"), dim, dim, seed);
    }
    p.init_const(&format!("{prefix}.bo"), 1, dim, 0.0);
    p.init_const(&format!("{prefix}.ln1.g"), 1, dim, 1.0);
    p.init_const(&format!("{prefix}.ln1.b"), 1, dim, 0.0);
    p.init_glorot(&format!("{prefix}.ff.w1"), dim, ff, seed);
    p.init_const(&format!("{prefix}.ff.b1"), 1, ff, 0.0);
    p.init_glorot(&format!("{prefix}.ff.w2"), ff, dim, seed);
    p.init_const(&format!("{prefix}.ff.b2"), 1, dim, 0.0);
    p.init_const(&format!("{prefix}.ln2.g"), 1, dim, 1.0);
    p.init_const(&format!("{prefix}.ln2.b"), 1, dim, 0.0);
}

#[derive(Debug, Clone, Copy)]
pub struct AttentionOutput {
    pub out: Var,
    /// Post-softmax (pre-dropout) weights, `E×heads`, in the interaction
    /// graph's edge order.
    pub weights: Var,
}

/// One sparse attention block over `ig`:
///
/// ```text
/// s(u→v) = q_v·k_u / √(d/heads)   for (u→v) in ig, per head
/// a      = softmax over the in-edges of v
/// m_v    = Σ a(u→v)·value_u,  heads concatenated, projected
/// h1     = LN(h + drop(m))
/// out    = LN(h1 + drop(FFN(h1)))
/// ```
#[allow(clippy::too_many_arguments)]
pub fn sparse_attention_layer(
    tape: &mut Tape,
    p: &Bound,
    prefix: &str,
    ig: &InteractionGraph,
    h: Var,
    settings: &AttentionSettings,
    mode: Mode,
    seeds: &mut SeedSequence,
) -> Result<AttentionOutput> {
    let (rows, d) = tape.shape(h);
    if rows != ig.n_total() {
        return Err(Error::Dimension {
            op: "sparse_attention_layer",
            left: (ig.n_total(), d),
            right: (rows, d),
        });
    }
    let heads = settings.heads;
    if heads == 0 || d % heads != 0 {
        return Err(Error::config(format!("width {d} not divisible by {heads} heads")));
    }
    let var = |name: &str| p.var(&format!("{prefix}.{name}"));
    let edges = ig.edges();

    let q = tape.matmul(h, var("wq")?)?;
    let k = tape.matmul(h, var("wk")?)?;
    let v = tape.matmul(h, var("wv")?)?;
    let scale = 1.0 / ((d / heads) as f64).sqrt();
    let scores = tape.edge_scores(q, k, edges, heads, scale)?;
    let weights = tape.segment_softmax(scores, edges)?;
    let dropped = tape.dropout(weights, settings.attention_dropout, mode, seeds.next_seed())?;
    let msg = tape.edge_aggregate(dropped, v, edges, heads)?;
    let msg = tape.matmul(msg, var("wo")?)?;
    let msg = tape.add_row(msg, var("bo")?)?;
    let msg = tape.dropout(msg, settings.dropout, mode, seeds.next_seed())?;
    let h1 = tape.add(h, msg)?;
    let h1 = tape.layer_norm(h1, var("ln1.g")?, var("ln1.b")?)?;

    let f = tape.matmul(h1, var("ff.w1")?)?;
    let f = tape.add_row(f, var("ff.b1")?)?;
    let f = tape.relu(f);
    let f = tape.matmul(f, var("ff.w2")?)?;
    let f = tape.add_row(f, var("ff.b2")?)?;
    let f = tape.dropout(f, settings.dropout, mode, seeds.next_seed())?;
    let h2 = tape.add(h1, f)?;
    let out = tape.layer_norm(h2, var("ln2.g")?, var("ln2.b")?)?;
    Ok(AttentionOutput { out, weights })
}
