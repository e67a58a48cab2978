//! Layer shapes of the networks used to characterise the accelerator.
//! All layers use Q8.8 activations and weights.

use crate::netmodel::{LayerDescriptor, NetworkDescriptor};

fn conv(n_in: usize, n_out: usize, k: usize, hw: usize, pad: usize, pool: bool) -> LayerDescriptor {
    LayerDescriptor::new(n_in, n_out, k, hw, hw)
        .with_pad(pad)
        .with_pool(pool)
}

fn vgg(name: &str, convs_per_block: [usize; 5]) -> NetworkDescriptor {
    let widths = [64, 128, 256, 512, 512];
    let mut layers = Vec::new();
    let mut n_in = 3;
    let mut size = 224;
    for (&count, &n_out) in convs_per_block.iter().zip(&widths) {
        for i in 0..count {
            let last = i + 1 == count;
            layers.push(conv(n_in, n_out, 3, size, 1, last));
            n_in = n_out;
        }
        size /= 2;
    }
    NetworkDescriptor::from_layers(name, layers)
}

/// 13 convolutional layers in blocks of 2, 2, 3, 3, 3.
pub fn vgg16() -> NetworkDescriptor {
    vgg("vgg16", [2, 2, 3, 3, 3])
}

/// 16 convolutional layers in blocks of 2, 2, 4, 4, 4.
pub fn vgg19() -> NetworkDescriptor {
    vgg("vgg19", [2, 2, 4, 4, 4])
}

pub fn roshambo_net() -> NetworkDescriptor {
    NetworkDescriptor::from_layers(
        "roshambo",
        [
            conv(1, 16, 5, 64, 0, true),
            conv(16, 32, 3, 30, 0, true),
            conv(32, 64, 3, 14, 0, true),
            conv(64, 128, 3, 6, 0, true),
            conv(128, 128, 1, 2, 0, true),
        ],
    )
}

pub fn giga1net() -> NetworkDescriptor {
    NetworkDescriptor::from_layers(
        "giga1net",
        [
            conv(3, 16, 1, 224, 0, true),
            conv(16, 16, 7, 112, 1, true),
            conv(16, 32, 7, 54, 0, true),
            conv(32, 64, 5, 24, 1, false),
            conv(64, 64, 5, 22, 1, false),
            conv(64, 64, 5, 20, 1, false),
            conv(64, 128, 3, 18, 1, false),
            conv(128, 128, 3, 18, 1, false),
            conv(128, 128, 3, 18, 1, false),
            conv(128, 128, 3, 18, 1, false),
            conv(128, 128, 3, 18, 1, true),
        ],
    )
}

pub fn face_detector() -> NetworkDescriptor {
    NetworkDescriptor::from_layers(
        "face_detector",
        [conv(1, 16, 5, 36, 0, true), conv(16, 16, 3, 16, 1, true)],
    )
}

/// Every network in the zoo, by name.
pub fn all() -> Vec<NetworkDescriptor> {
    vec![vgg16(), vgg19(), giga1net(), roshambo_net(), face_detector()]
}

pub fn by_name(name: &str) -> Option<NetworkDescriptor> {
    all().into_iter().find(|n| n.name.as_deref() == Some(name))
}
