//! Methods shipped with the crate.
//!
//! Classic methods are stored exactly (fractions where the coefficients are
//! rational). Published optimized methods are stored with the printed digits.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tableau::{parse_method, load_method, Method};

const BUNDLED: &[(&str, &str)] = &[
    ("forward-euler", include_str!("../methods/forward-euler.txt")),
    ("ssprk22", include_str!("../methods/ssprk22.txt")),
    ("ssprk33", include_str!("../methods/ssprk33.txt")),
    ("ketcheson-ssprk104", include_str!("../methods/ketcheson-ssprk104.txt")),
    ("implicit-midpoint", include_str!("../methods/implicit-midpoint.txt")),
    ("sspirk33", include_str!("../methods/sspirk33.txt")),
    ("sspirk44", include_str!("../methods/sspirk44.txt")),
    ("lnl-dirk-6-4-6", include_str!("../methods/lnl-dirk-6-4-6.txt")),
    ("lnl-dirk-8-4-9", include_str!("../methods/lnl-dirk-8-4-9.txt")),
    ("lnl-dirk-10-2-11", include_str!("../methods/lnl-dirk-10-2-11.txt")),
    ("imex-ssprk104-sdirk", include_str!("../methods/imex-ssprk104-sdirk.txt")),
    ("imex-ssprk33-beta23", include_str!("../methods/imex-ssprk33-beta23.txt")),
    ("imex-k10-s5-p3-plin5", include_str!("../methods/imex-k10-s5-p3-plin5.txt")),
    ("imex-k10-s5-p3-plin4", include_str!("../methods/imex-k10-s5-p3-plin4.txt")),
    ("imex-k10-s7-p4-plin6", include_str!("../methods/imex-k10-s7-p4-plin6.txt")),
    ("imex-k100-s5-p3-plin5", include_str!("../methods/imex-k100-s5-p3-plin5.txt")),
    ("imex-k100-s5-p3-plin4", include_str!("../methods/imex-k100-s5-p3-plin4.txt")),
    ("imex-s10-pe4-pi3-plin6", include_str!("../methods/imex-s10-pe4-pi3-plin6.txt")),
];

/// Names of all bundled methods, in catalog order.
pub fn bundled_names() -> impl Iterator<Item = &'static str> {
    BUNDLED.iter().map(|(name, _)| *name)
}

/// The source text of a bundled method file.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn bundled(name: &str) -> Result<Method> {
    let text = bundled_text(name).ok_or_else(|| {
        Error::Validation(format!(
            "no bundled method named '{name}' (known: {})",
            bundled_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    parse_method(text)
}

/// Loads `arg` as a file when such a path exists, otherwise as a bundled name.
pub fn resolve(arg: &str) -> Result<Method> {
    if Path::new(arg).is_file() {
        load_method(arg)
    } else {
        bundled(arg)
    }
}
