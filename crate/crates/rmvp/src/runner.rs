//! Runner (implemented later in this build).
