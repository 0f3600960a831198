"""Package definition for poisonwatch."""

from setuptools import find_packages, setup

setup(
    name="poisonwatch",
    version="0.1.0",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    install_requires=[
        "pydantic>=2.6.0",
        "pydantic-settings>=2.7.1",
        "click>=8.0.0",
        "rich>=13.9.4",
        "numpy>=1.26.0",
    ],
    extras_require={
        "dev": [
            "mypy>=1.14.1",
            "ruff>=0.9.2",
            "pre-commit>=3.6.0",
            "pytest>=8.3.4",
            "scipy>=1.11.0",
        ]
    },
    python_requires=">=3.11",
    include_package_data=True,
    entry_points={"console_scripts": ["poisonwatch=poisonwatch.__main__:main"]},
)
