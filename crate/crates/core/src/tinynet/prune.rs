//! Global magnitude pruning over a network's convolution kernels.

use super::net::FlowNetwork;
use super::{NetError, Result};

/// Fraction of prunable weights to zero, selected globally by ascending
/// magnitude. Biases are never pruned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSpec {
    pub fraction: f32,
}

impl PruneSpec {
    pub fn new(fraction: f32) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) || !fraction.is_finite() {
            return Err(NetError::InvalidPruneFraction(fraction));
        }
        Ok(Self { fraction })
    }
}

/// Return a copy of the network with exactly `floor(fraction * N)` of its N
/// convolution-kernel weights set to zero, chosen by ascending `|w|` with
/// ties broken by layer order then element index. The input network is left
/// untouched.
pub fn prune(net: &FlowNetwork, spec: PruneSpec) -> FlowNetwork {
    let total: usize = net.layers().iter().map(|l| l.weight.len()).sum();
    let count = ((spec.fraction as f64) * total as f64).floor() as usize;
    let mut pruned = net.clone();
    if count == 0 {
        return pruned;
    }
    let mut order: Vec<(f32, usize, usize)> = Vec::with_capacity(total);
    for (li, layer) in net.layers().iter().enumerate() {
        for (wi, &w) in layer.weight.data().iter().enumerate() {
            order.push((w.abs(), li, wi));
        }
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    for &(_, li, wi) in order.iter().take(count) {
        pruned.layers_mut()[li].weight.data_mut()[wi] = 0.0;
    }
    pruned
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imagecore::Image;

    #[test]
    fn prune_zero_is_forward_identical() {
        let net = FlowNetwork::new(3, 11);
        let out = prune(&net, PruneSpec::new(0.0).unwrap());
        let img = Image::from_fn(16, 16, 3, |y, x, c| ((y * x + c) % 7) as f32 / 6.0).unwrap();
        assert_eq!(
            net.forward(&img).unwrap().dx(),
            out.forward(&img).unwrap().dx()
        );
    }

    #[test]
    fn prune_one_zeroes_all_kernels_but_not_biases() {
        let mut net = FlowNetwork::new(1, 3);
        for layer in net.layers_mut() {
            layer.bias.data_mut().fill(0.25);
        }
        let out = prune(&net, PruneSpec::new(1.0).unwrap());
        for layer in out.layers() {
            assert!(layer.weight.data().iter().all(|&w| w == 0.0));
            assert!(layer.bias.data().iter().all(|&b| b == 0.25));
        }
    }

    #[test]
    fn prune_half_keeps_largest_magnitudes() {
        // weights [-0.1, 0.2, -0.3, 0.4] -> [0, 0, -0.3, 0.4]
        let mut net = FlowNetwork::new(1, 5);
        net.zero_params();
        {
            let w = net.layers_mut()[0].weight.data_mut();
            w[0] = -0.1;
            w[1] = 0.2;
            w[2] = -0.3;
            w[3] = 0.4;
        }
        // Only these four weights are nonzero; prune so that exactly the two
        // smallest of them go (fraction chosen to cut N_total/2 >= the zeros
        // plus the two small ones).
        let total: usize = net.layers().iter().map(|l| l.weight.len()).sum();
        let zeros = total - 4;
        let fraction = (zeros + 2) as f32 / total as f32;
        let out = prune(&net, PruneSpec::new(fraction).unwrap());
        let w = out.layers()[0].weight.data();
        assert_eq!(&w[..4], &[0.0, 0.0, -0.3, 0.4]);
    }

    #[test]
    fn prune_is_idempotent_and_leaves_original_untouched() {
        let net = FlowNetwork::new(3, 9);
        let original = net.clone();
        let spec = PruneSpec::new(0.5).unwrap();
        let once = prune(&net, spec);
        let twice = prune(&once, spec);
        assert_eq!(once, twice);
        assert_eq!(net, original);
    }

    #[test]
    fn prune_count_is_exact_floor() {
        let net = FlowNetwork::new(1, 2);
        let total: usize = net.layers().iter().map(|l| l.weight.len()).sum();
        for fraction in [0.1f32, 0.25, 0.5, 0.77] {
            let out = prune(&net, PruneSpec::new(fraction).unwrap());
            let zeroed: usize = out
                .layers()
                .iter()
                .map(|l| l.weight.data().iter().filter(|&&w| w == 0.0).count())
                .sum();
            assert_eq!(zeroed, ((fraction as f64) * total as f64).floor() as usize);
        }
    }

    #[test]
    fn invalid_fraction_rejected() {
        assert!(PruneSpec::new(-0.1).is_err());
        assert!(PruneSpec::new(1.1).is_err());
    }
}
