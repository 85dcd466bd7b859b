# Cross-cutting helpers: logging, configuration, numerics, reporting
