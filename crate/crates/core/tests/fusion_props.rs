use apollokit::fusion::{
    concat_channels, duplicate_image_to_clip, fuse, interpolate_grid, EncoderKind, EncoderSpec, StubEncoder,
};
use apollokit::FeatureGrid;
use proptest::prelude::*;

fn grid(t: usize, h: usize, w: usize, c: usize) -> impl Strategy<Value = FeatureGrid> {
    prop::collection::vec(-10.0f64..10.0, t * h * w * c).prop_map(move |d| FeatureGrid::new(t, h, w, c, d).unwrap())
}

fn any_grid() -> impl Strategy<Value = FeatureGrid> {
    (1usize..3, 1usize..7, 1usize..7, 1usize..4).prop_flat_map(|(t, h, w, c)| grid(t, h, w, c))
}

proptest! {
    #[test]
    fn constants_survive_interpolation(v in -100.0f64..100.0, h in 1usize..8, w in 1usize..8, th in 1usize..20, tw in 1usize..20) {
        let g = FeatureGrid::filled(2, h, w, 3, v).unwrap();
        let out = interpolate_grid(&g, th, tw).unwrap();
        prop_assert!(out.data().iter().all(|x| (x - v).abs() <= 1e-12));
    }

    #[test]
    fn same_shape_is_identity(g in any_grid()) {
        let out = interpolate_grid(&g, g.height(), g.width()).unwrap();
        prop_assert_eq!(out, g);
    }

    #[test]
    fn interpolation_is_linear(
        (a, b) in (1usize..5, 1usize..5).prop_flat_map(|(h, w)| (grid(1, h, w, 2), grid(1, h, w, 2))),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        th in 1usize..12,
        tw in 1usize..12,
    ) {
        let mix = |x: &FeatureGrid, y: &FeatureGrid| {
            let d = x.data().iter().zip(y.data()).map(|(p, q)| alpha * p + beta * q).collect();
            FeatureGrid::new(x.frames(), x.height(), x.width(), x.channels(), d).unwrap()
        };
        let lhs = interpolate_grid(&mix(&a, &b), th, tw).unwrap();
        let rhs = mix(&interpolate_grid(&a, th, tw).unwrap(), &interpolate_grid(&b, th, tw).unwrap());
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((l - r).abs() <= 1e-9 * l.abs().max(r.abs()).max(1.0));
        }
    }

    #[test]
    fn concat_is_associative((a, b, c) in (1usize..3, 1usize..4, 1usize..4).prop_flat_map(|(t, h, w)| {
        (grid(t, h, w, 1), grid(t, h, w, 2), grid(t, h, w, 3))
    })) {
        let nested = concat_channels(&[a.clone(), concat_channels(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        let flat = concat_channels(&[a, b, c]).unwrap();
        prop_assert_eq!(nested, flat);
    }

    #[test]
    fn frame_local_encoder_keeps_duplicates_equal(img in (1usize..8, 1usize..8, 1usize..4).prop_flat_map(|(h, w, c)| grid(1, h, w, c)), seed in 0u64..1000) {
        let spec = EncoderSpec { name: "img".into(), clip_frames: 4, out_height: 3, out_width: 3, out_channels: 5, seed };
        let enc = StubEncoder::new(spec, EncoderKind::FrameLocal).unwrap();
        let out = enc.encode(&duplicate_image_to_clip(&img, 4).unwrap()).unwrap();
        let first = out.frame(0);
        for t in 1..4 {
            prop_assert_eq!(out.frame(t), first.clone());
        }
    }
}

#[test]
fn fuse_picks_largest_grid() {
    let a = FeatureGrid::filled(2, 3, 5, 1, 1.0).unwrap();
    let b = FeatureGrid::filled(2, 4, 2, 2, 2.0).unwrap();
    let f = fuse(&[a, b]).unwrap();
    assert_eq!(f.dims(), [2, 4, 5, 3]);
    assert!(f.pixel(1, 3, 4).iter().zip([1.0, 2.0, 2.0]).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn mismatched_frames_rejected() {
    let a = FeatureGrid::filled(2, 3, 3, 1, 1.0).unwrap();
    let b = FeatureGrid::filled(3, 3, 3, 1, 1.0).unwrap();
    let err = concat_channels(&[a, b]).unwrap_err().to_string();
    assert!(err.contains("grids[1]"), "{err}");
}
