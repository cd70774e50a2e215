use crate::autograd::{shape_err, Result, Scalar, Tensor};

/// Affine map `x · W + b` with `x: [B, n]`, `W: [n, m]`, `b: [m]`.
pub fn dense<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] || b.len() != ws[1] {
        return shape_err("dense", format!("x {xs:?}, W {ws:?}, b {:?}", b.shape()));
    }
    let (batch, n, m) = (xs[0], ws[0], ws[1]);
    let (xd, wd, bd) = (x.data(), w.data(), b.data());
    let mut out = Vec::with_capacity(batch * m);
    for xr in xd.chunks_exact(n) {
        let mut row = bd.to_vec();
        for (i, &xv) in xr.iter().enumerate() {
            for (o, &wv) in row.iter_mut().zip(&wd[i * m..][..m]) {
                *o = *o + xv * wv;
            }
        }
        out.extend(row);
    }
    let (xc, wc) = (x.clone(), w.clone());
    let (need_x, need_w, need_b) = (x.requires_grad(), w.requires_grad(), b.requires_grad());
    Ok(Tensor::from_op(
        "dense",
        vec![batch, m],
        out,
        vec![x.clone(), w.clone(), b.clone()],
        move |g| {
            let (xd, wd) = (xc.data(), wc.data());
            let gx = need_x.then(|| {
                let mut gx = vec![T::zero(); batch * n];
                for (gxr, gr) in gx.chunks_exact_mut(n).zip(g.chunks_exact(m)) {
                    for (i, v) in gxr.iter_mut().enumerate() {
                        *v = wd[i * m..][..m].iter().zip(gr).fold(T::zero(), |a, (&w, &gv)| a + w * gv);
                    }
                }
                gx
            });
            let gw = need_w.then(|| {
                let mut gw = vec![T::zero(); n * m];
                for (xr, gr) in xd.chunks_exact(n).zip(g.chunks_exact(m)) {
                    for (i, &xv) in xr.iter().enumerate() {
                        for (w, &gv) in gw[i * m..][..m].iter_mut().zip(gr) {
                            *w = *w + xv * gv;
                        }
                    }
                }
                gw
            });
            let gb = need_b.then(|| {
                let mut gb = vec![T::zero(); m];
                for gr in g.chunks_exact(m) {
                    gb.iter_mut().zip(gr).for_each(|(a, &v)| *a = *a + v);
                }
                gb
            });
            vec![gx, gw, gb]
        },
    ))
}
