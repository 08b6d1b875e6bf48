//! Study harness (implemented later in this build).
