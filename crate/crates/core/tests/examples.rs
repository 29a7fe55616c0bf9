//! Every example runs to completion.

macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run().unwrap();
        }
    };
}

example!(geometry_cut);
example!(fom_patch_test);
example!(pod_basis);
example!(deim_operator);
example!(rom_online);
example!(error_estimators);
example!(rate_fits);
example!(full_pipeline);
