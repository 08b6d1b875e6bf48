//! Run configuration (implemented later in this build).
