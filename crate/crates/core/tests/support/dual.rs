//! Forward-mode dual-number oracle for the BPTT gradients. The network is
//! re-simulated here with values carrying a derivative part; the Heaviside
//! step keeps its value but passes `σ'(u − θ)·du` as its derivative, the
//! same substitution the reverse pass makes.

use std::ops::{Add, Mul, Sub};

use neuro_attitude::domain::EulerAngles;
use neuro_attitude::snn::NetworkParams;
use neuro_attitude::train::{example_gradients, superspike_grad, Example, SurrogateSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    d: f64,
}

impl Dual {
    fn c(v: f64) -> Self {
        Dual { v, d: 0.0 }
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        Dual {
            v: self.v + o.v,
            d: self.d + o.d,
        }
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual {
            v: self.v - o.v,
            d: self.d - o.d,
        }
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        Dual {
            v: self.v * o.v,
            d: self.d * o.v + self.v * o.d,
        }
    }
}

/// Every differentiable parameter, in the order the gradient struct flattens them.
struct DualNet {
    enc_w: Vec<Dual>,
    ff_w: Vec<Dual>,
    rec_w: Vec<Dual>,
    out_w: Vec<Dual>,
    enc_mem: Vec<Dual>,
    enc_syn: Vec<Dual>,
    hid_mem: Vec<Dual>,
    hid_syn: Vec<Dual>,
    out_mem: Dual,
    out_syn: Dual,
}

impl DualNet {
    fn new(p: &NetworkParams, seed_index: usize) -> Self {
        let mut k = 0usize;
        let mut lift = |xs: &[f64]| -> Vec<Dual> {
            xs.iter()
                .map(|&v| {
                    let d = if k == seed_index { 1.0 } else { 0.0 };
                    k += 1;
                    Dual { v, d }
                })
                .collect()
        };
        let enc_w = lift(p.enc_weights.as_slice());
        let ff_w = lift(p.hid_weights_ff.as_slice());
        let rec_w = lift(p.hid_weights_rec.as_slice());
        let out_w = lift(p.out_weights.as_slice());
        let enc_mem = lift(&p.enc_lif.tau_mem);
        let enc_syn = lift(&p.enc_lif.tau_syn);
        let hid_mem = lift(&p.hid_lif.tau_mem);
        let hid_syn = lift(&p.hid_lif.tau_syn);
        let out_mem = lift(&[p.out_li.tau_mem])[0];
        let out_syn = lift(&[p.out_li.tau_syn])[0];
        Self {
            enc_w,
            ff_w,
            rec_w,
            out_w,
            enc_mem,
            enc_syn,
            hid_mem,
            hid_syn,
            out_mem,
            out_syn,
        }
    }
}

fn lif(v: &mut Dual, i: &mut Dual, mem: Dual, syn: Dual, thr: f64, cur: Dual, w: SurrogateSpec) -> Dual {
    *i = syn * *i + cur;
    let u = mem * *v + *i;
    let fired = u.v - thr > 0.0;
    let s = Dual {
        v: if fired { 1.0 } else { 0.0 },
        d: superspike_grad(u.v - thr, w) * u.d,
    };
    *v = u * (Dual::c(1.0) - s);
    s
}

fn dual_loss(p: &NetworkParams, net: &DualNet, ex: &Example, w: SurrogateSpec) -> Dual {
    let (ne, nh) = (p.n_enc(), p.n_hid());
    let mut ve = vec![Dual::c(0.0); ne];
    let mut ie = ve.clone();
    let mut vh = vec![Dual::c(0.0); nh];
    let mut ih = vh.clone();
    let mut sh_prev = vec![Dual::c(0.0); nh];
    let mut vo = [Dual::c(0.0); 2];
    let mut io = [Dual::c(0.0); 2];
    let mut loss = Dual::c(0.0);
    for (x, target) in ex.inputs.iter().zip(&ex.targets) {
        let mut se = Vec::with_capacity(ne);
        for n in 0..ne {
            let mut c = Dual::c(0.0);
            for k in 0..6 {
                c = c + net.enc_w[n * 6 + k] * Dual::c(x[k]);
            }
            let thr = p.enc_lif.threshold[n];
            se.push(lif(&mut ve[n], &mut ie[n], net.enc_mem[n], net.enc_syn[n], thr, c, w));
        }
        let mut sh = Vec::with_capacity(nh);
        for n in 0..nh {
            let mut c = Dual::c(0.0);
            for j in 0..ne {
                c = c + net.ff_w[n * ne + j] * se[j];
            }
            for j in 0..nh {
                c = c + net.rec_w[n * nh + j] * sh_prev[j];
            }
            let thr = p.hid_lif.threshold[n];
            sh.push(lif(&mut vh[n], &mut ih[n], net.hid_mem[n], net.hid_syn[n], thr, c, w));
        }
        let tgt = [target.pitch, target.roll];
        for k in 0..2 {
            let mut c = Dual::c(0.0);
            for j in 0..nh {
                c = c + net.out_w[k * nh + j] * sh[j];
            }
            io[k] = net.out_syn * io[k] + c;
            vo[k] = net.out_mem * vo[k] + io[k];
            let e = vo[k] - Dual::c(tgt[k]);
            loss = loss + Dual::c(0.5) * e * e;
        }
        sh_prev = sh;
    }
    loss
}

pub fn random_case(seed: u64) -> (NetworkParams, Example) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = NetworkParams::random(3, 3, (0.3, 0.95), &mut rng);
    for m in p.weight_matrices_mut() {
        m.map_in_place(|w| 3.0 * w);
    }
    p.out_li.tau_mem = rng.random_range(0.3..0.95);
    p.out_li.tau_syn = rng.random_range(0.3..0.95);
    let steps = 5;
    let ex = Example {
        inputs: (0..steps)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect(),
        targets: (0..steps)
            .map(|_| EulerAngles::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
            .collect(),
    };
    (p, ex)
}


/// Outcome of comparing reverse-mode gradients with the oracle on one
/// random case.
pub struct OracleCheck {
    pub relative_error: f64,
    /// Worst per-entry violation of `|a − b| ≤ 1e-6·|b| + 1e-10·‖b‖`; below 1 passes.
    pub worst_entry: f64,
    pub loss_gap: f64,
    pub spiked: bool,
}

pub fn check_seed(seed: u64) -> OracleCheck {
    let w = SurrogateSpec::default();
    let (p, ex) = random_case(seed);
    let (loss, grads) = example_gradients(&p, &ex, w).unwrap();
    let reverse = grads.flatten();
    let mut loss_gap: f64 = 0.0;
    let forward: Vec<f64> = (0..reverse.len())
        .map(|k| {
            let l = dual_loss(&p, &DualNet::new(&p, k), &ex, w);
            loss_gap = loss_gap.max((l.v - loss).abs() / loss.abs().max(1.0));
            l.d
        })
        .collect();
    let diff = reverse
        .iter()
        .zip(&forward)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm = forward.iter().map(|b| b * b).sum::<f64>().sqrt();
    let worst_entry = reverse
        .iter()
        .zip(&forward)
        .map(|(a, b)| (a - b).abs() / (1e-6 * b.abs() + 1e-10 * norm))
        .fold(0.0, f64::max);
    let out = neuro_attitude::snn::network_forward(&p, &ex.inputs).unwrap();
    OracleCheck {
        relative_error: if norm > 0.0 { diff / norm } else { f64::INFINITY },
        worst_entry,
        loss_gap,
        spiked: out.spikes.hid.iter().any(|s| *s == 1),
    }
}
