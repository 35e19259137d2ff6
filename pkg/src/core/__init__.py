# Core Package 