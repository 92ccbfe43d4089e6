use super::network::{ForwardTrace, GruNetwork, NetParams};
use super::GruError;
use crate::matrix::Matrix;
use crate::real::{axpy, Real};

/// Reverse-mode gradients of `dL/d(activity logits) . activity +
/// dL/d(presence logits) . presence` with respect to every parameter,
/// through the whole unrolled recurrence.
pub fn backward_bptt<T: Real>(
    net: &GruNetwork<T>,
    trace: &ForwardTrace<T>,
    d_activity: &[T],
    d_presence: &[T],
) -> Result<NetParams<T>, GruError> {
    if trace.version != net.version() {
        return Err(GruError::StaleTrace {
            trace: trace.version,
            network: net.version(),
        });
    }
    let cfg = net.config();
    if d_activity.len() != cfg.activity_classes || d_presence.len() != cfg.presence_classes {
        return Err(GruError::Shape(
            "logit gradient length does not match heads".into(),
        ));
    }
    if trace.layers.len() != cfg.num_layers || trace.is_empty() {
        return Err(GruError::Shape("trace does not match network depth".into()));
    }
    let params = net.params();
    let mut grads = params.zeros_like();
    let hid = cfg.hidden_size;
    let steps = trace.len();

    // Heads read the final top-layer state.
    let top = trace.layers.last().expect("non-empty");
    let h_last = top.h.row(steps - 1);
    let mut dh_top = vec![T::zero(); hid];
    for (head, ghead, d) in [
        (&params.activity, &mut grads.activity, d_activity),
        (&params.presence, &mut grads.presence, d_presence),
    ] {
        for (i, &di) in d.iter().enumerate() {
            axpy(di, h_last, ghead.w.row_mut(i));
            ghead.b[i] += di;
            axpy(di, head.w.row(i), &mut dh_top);
        }
    }

    // Gradient arriving at each layer's outputs from the layer above.
    let mut d_out = Matrix::zeros(steps, hid);
    d_out.row_mut(steps - 1).copy_from_slice(&dh_top);

    let zeros = vec![T::zero(); hid];
    for (l, lt) in trace.layers.iter().enumerate().rev() {
        let p = &params.layers[l];
        let g = &mut grads.layers[l];
        let inp = lt.inputs.cols();
        let mut d_in = Matrix::zeros(steps, inp);
        let mut carry = vec![T::zero(); hid];
        let mut cat = vec![T::zero(); hid + inp];
        let mut d_cat = vec![T::zero(); hid + inp];
        let mut dz = vec![T::zero(); hid];
        let mut dr = vec![T::zero(); hid];
        let mut dc = vec![T::zero(); hid];
        for t in (0..steps).rev() {
            let h_prev = if t == 0 { &zeros[..] } else { lt.h.row(t - 1) };
            let (z, r, cand, x) = (
                lt.z.row(t),
                lt.r.row(t),
                lt.candidate.row(t),
                lt.inputs.row(t),
            );
            let dh: Vec<T> = carry
                .iter()
                .zip(d_out.row(t))
                .map(|(&a, &b)| a + b)
                .collect();

            for i in 0..hid {
                dz[i] = dh[i] * (cand[i] - h_prev[i]) * z[i] * (T::one() - z[i]);
                dc[i] = dh[i] * z[i] * (T::one() - cand[i] * cand[i]);
                carry[i] = dh[i] * (T::one() - z[i]);
            }

            // Candidate path, input [r * h_prev, x].
            for i in 0..hid {
                cat[i] = r[i] * h_prev[i];
            }
            cat[hid..].copy_from_slice(x);
            d_cat.iter_mut().for_each(|v| *v = T::zero());
            for (i, &d) in dc.iter().enumerate() {
                axpy(d, &cat, g.wh.row_mut(i));
                g.bh[i] += d;
                axpy(d, p.wh.row(i), &mut d_cat);
            }
            for i in 0..hid {
                let d_rh = d_cat[i];
                dr[i] = d_rh * h_prev[i] * r[i] * (T::one() - r[i]);
                carry[i] += d_rh * r[i];
            }
            let dx = d_in.row_mut(t);
            for (a, &b) in dx.iter_mut().zip(&d_cat[hid..]) {
                *a += b;
            }

            // Gate paths, input [h_prev, x].
            cat[..hid].copy_from_slice(h_prev);
            d_cat.iter_mut().for_each(|v| *v = T::zero());
            for i in 0..hid {
                axpy(dz[i], &cat, g.wz.row_mut(i));
                g.bz[i] += dz[i];
                axpy(dz[i], p.wz.row(i), &mut d_cat);
                axpy(dr[i], &cat, g.wr.row_mut(i));
                g.br[i] += dr[i];
                axpy(dr[i], p.wr.row(i), &mut d_cat);
            }
            for (c, &v) in carry.iter_mut().zip(&d_cat[..hid]) {
                *c += v;
            }
            for (a, &b) in dx.iter_mut().zip(&d_cat[hid..]) {
                *a += b;
            }
        }
        d_out = d_in;
    }
    Ok(grads)
}
