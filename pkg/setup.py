import io

from setuptools import setup, find_packages


def readme():
  with io.open('README.md', encoding='utf-8') as f:
    return f.read()


setup(name='pycpdm',
      version='0.1.1',
      description='Content preserving diffusion models for speckle reduction in OCT-like images',
      long_description=readme(),
      long_description_content_type='text/markdown',
      author='pycpdm Team',
      license='LICENSE.txt',
      include_package_data=True,
      install_requires=[
        'Click>=7.0',
        'numpy>=1.20',
        'pandas',
        'PyYAML>=5.1.2',
        'simplejson>=3.16.0',
        'scipy>=1.6',
        'PyWavelets>=1.1'
      ],
      python_requires=">=3.8",
      scripts=['pycpdm/pycpdm_cli.py'],
      packages=find_packages(),
      entry_points={
        'console_scripts': [
          'pycpdm = pycpdm.pycpdm_cli:main'
        ]},
      package_data={'pycpdm': ['config/*.yaml']}, zip_safe=False)
