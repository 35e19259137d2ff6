# CLI Package