//! Reports (implemented later in this build).
