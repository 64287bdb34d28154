from setuptools import find_packages, setup


setup(
    name='halvingeta',
    version='0.1.0',
    description='Predict the time of a Bitcoin block-reward halving, with variance',
    long_description=open('README.md', encoding='utf-8').read(),
    long_description_content_type='text/markdown',
    packages=find_packages(include=['halvingeta*']),
    install_requires=[
        'joblib>=1.2',
        'numpy>=1.22',
        'requests>=2.28',
        'scipy>=1.8',
    ],
    entry_points={
        'console_scripts': [
            'halvingeta=halvingeta.cli:main',
        ],
    },
    python_requires='>=3.9',
)
